//! Parametric distributional regression: Gaussian (constant and
//! input-dependent variance), Student-t, log-normal and gamma families, each
//! with an optional ridge-penalized variant.
//!
//! All fits standardize the covariates internally and report coefficients
//! on the raw scale with the intercept first.

mod gamma;
mod gauss;
mod hetero;
mod linear;
mod lognormal;
mod student;

pub use gamma::{fit_gamma_glm, GammaGlmFit};
pub use gauss::{fit_gauss_homo, GaussHomoFit};
pub use hetero::{fit_gauss_hetero, hetero_objective, GaussHeteroFit};
pub use linear::{ridge_loo_path, ridge_solve_loo, RidgeConfig};
pub use lognormal::{fit_lognormal, LogNormalFit, LogScale};
pub use student::{fit_student_t, profile_t_log_lik, StudentTFit, NU_BOUNDS};


use crate::dataset::min_max;
use crate::error::Result;
use crate::grid::{EvalGrid, GridDensity};
use crate::model::ConditionalDensity;

/// Any fitted parametric family.
#[derive(Debug, Clone, PartialEq)]
pub enum ParametricFit {
    GaussHomo(GaussHomoFit),
    GaussHetero(GaussHeteroFit),
    StudentT(StudentTFit),
    LogNormal(LogNormalFit),
    GammaGlm(GammaGlmFit),
}

impl ParametricFit {
    fn inner(&self) -> &dyn ConditionalDensity {
        match self {
            ParametricFit::GaussHomo(f) => f,
            ParametricFit::GaussHetero(f) => f,
            ParametricFit::StudentT(f) => f,
            ParametricFit::LogNormal(f) => f,
            ParametricFit::GammaGlm(f) => f,
        }
    }
}

impl ConditionalDensity for ParametricFit {
    fn n_features(&self) -> usize {
        self.inner().n_features()
    }

    fn density(&self, x: &[f64], grid: &EvalGrid) -> Result<GridDensity> {
        self.inner().density(x, grid)
    }
}

/// Predictive density of any parametric fit at covariate row `x`.
pub fn predict_parametric(fit: &ParametricFit, x: &[f64], grid: &EvalGrid) -> Result<GridDensity> {
    fit.density(x, grid)
}

/// The response range, or the degenerate substitute `max(|y|, 1) * 0.1`
/// when all responses are equal.
pub(crate) fn effective_range(y: &[f64]) -> f64 {
    let (lo, hi) = min_max(y);
    if hi > lo {
        hi - lo
    } else {
        lo.abs().max(1.0) * 0.1
    }
}

/// Lower bound for every fitted scale parameter.
pub(crate) fn scale_floor(y: &[f64]) -> f64 {
    1e-8 * effective_range(y)
}

/// Shift making all responses positive: `-min + 0.01 * range` when
/// `min <= 0`, else zero.
pub fn positivity_shift(y: &[f64]) -> f64 {
    let (lo, _) = min_max(y);
    if lo > 0.0 {
        0.0
    } else {
        (-lo + 0.01 * effective_range(y)).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_examples() {
        // min -1, range 10
        assert!((positivity_shift(&[-1.0, 4.0, 9.0]) - 1.1).abs() < 1e-12);
        assert_eq!(positivity_shift(&[0.5, 2.0]), 0.0);
        assert!(positivity_shift(&[0.0, 2.0]) > 0.0);
    }
}
