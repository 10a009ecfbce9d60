use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use super::linear::{linear_predictor, LinearFit, RidgeConfig};
use super::positivity_shift;
use crate::dataset::Dataset;
use crate::error::Result;
use crate::grid::{EvalGrid, GridDensity};
use crate::model::{check_dim, ConditionalDensity};
use crate::special::gamma_ln_pdf;

/// Upper bound on the fitted shape.
pub const SHAPE_CAP: f64 = 1e6;

/// Gamma regression with log link: `Y + c ~ Gamma(a, exp(xᵀβ) / a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaGlmFit {
    pub beta: Vec<f64>,
    pub shape_a: f64,
    pub shift_c: f64,
    pub lambda: Option<f64>,
}

/// Log-mean by regressing `log(y + c)` on `x`; shape from the variance of the
/// log-scale residuals, `a = 1 / Var`.
pub fn fit_gamma_glm(ds: &Dataset, ridge: Option<&RidgeConfig>) -> Result<GammaGlmFit> {
    let shift_c = positivity_shift(&ds.response);
    let z: Vec<f64> = ds.response.iter().map(|y| (y + shift_c).ln()).collect();
    let lf = LinearFit::fit(&ds.features, &z, ridge)?;
    let shape_a = shape_from_residuals(&lf.residuals);
    Ok(GammaGlmFit { beta: lf.raw_coef(), shape_a, shift_c, lambda: lf.lambda })
}

pub(crate) fn shape_from_residuals(res: &[f64]) -> f64 {
    let n = res.len() as f64;
    let mean = res.iter().sum::<f64>() / n;
    let var = res.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    if var > 0.0 {
        (1.0 / var).min(SHAPE_CAP)
    } else {
        SHAPE_CAP
    }
}

impl ConditionalDensity for GammaGlmFit {
    fn n_features(&self) -> usize {
        self.beta.len() - 1
    }

    fn density(&self, x: &[f64], grid: &EvalGrid) -> Result<GridDensity> {
        check_dim(self.n_features(), x)?;
        let mu = linear_predictor(&self.beta, x).exp();
        let scale = mu / self.shape_a;
        GridDensity::from_fn(*grid, |y| gamma_ln_pdf(y + self.shift_c, self.shape_a, scale).exp())
    }
}
