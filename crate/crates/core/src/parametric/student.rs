use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use super::linear::{linear_predictor, LinearFit, RidgeConfig};
use super::scale_floor;
use crate::dataset::Dataset;
use crate::error::Result;
use crate::grid::{EvalGrid, GridDensity};
use crate::model::{check_dim, ConditionalDensity};
use crate::special::student_t_ln_pdf;

/// Search interval for the degrees of freedom.
pub const NU_BOUNDS: (f64, f64) = (2.01, 200.0);

const NU_GRID_POINTS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct StudentTFit {
    pub beta: Vec<f64>,
    pub nu: f64,
    pub sigma: f64,
    pub lambda: Option<f64>,
}

/// Scale implied by the residual second moment: `sqrt(m₂ (ν − 2) / ν)`.
fn moment_scale(m2: f64, nu: f64, floor: f64) -> f64 {
    (m2 * (nu - 2.0) / nu).sqrt().max(floor)
}

/// Student-t log-likelihood of `residuals` at `nu`, with the scale tied to
/// the residual second moment.
pub fn profile_t_log_lik(residuals: &[f64], nu: f64, floor: f64) -> f64 {
    let m2 = residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64;
    let sigma = moment_scale(m2, nu, floor);
    residuals.iter().map(|&r| student_t_ln_pdf(r, 0.0, sigma, nu)).sum()
}

/// Maximizes `f` over `[lo, hi]`: a log-spaced scan followed by golden-section
/// refinement around the best scan point.
fn maximize_log_grid(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let (llo, lhi) = (lo.ln(), hi.ln());
    let pts: Vec<f64> = (0..NU_GRID_POINTS).map(|i| (llo + (lhi - llo) * i as f64 / (NU_GRID_POINTS - 1) as f64).exp()).collect();
    let vals: Vec<f64> = pts.iter().map(|&p| f(p)).collect();
    let best = (0..pts.len()).fold(0, |b, i| if vals[i] > vals[b] { i } else { b });
    let mut a = pts[best.saturating_sub(1)].ln();
    let mut b = pts[(best + 1).min(pts.len() - 1)].ln();
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c.exp()), f(d.exp()));
    for _ in 0..60 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c.exp());
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d.exp());
        }
    }
    let refined = (0.5 * (a + b)).exp();
    if f(refined) >= vals[best] {
        refined
    } else {
        pts[best]
    }
}

/// Linear mean, then degrees of freedom by profile likelihood over
/// [`NU_BOUNDS`] and the moment-matched scale.
pub fn fit_student_t(ds: &Dataset, ridge: Option<&RidgeConfig>) -> Result<StudentTFit> {
    let lf = LinearFit::fit(&ds.features, &ds.response, ridge)?;
    let floor = scale_floor(&ds.response);
    let res = &lf.residuals;
    let nu = maximize_log_grid(|nu| profile_t_log_lik(res, nu, floor), NU_BOUNDS.0, NU_BOUNDS.1);
    let m2 = res.iter().map(|r| r * r).sum::<f64>() / res.len() as f64;
    Ok(StudentTFit { beta: lf.raw_coef(), nu, sigma: moment_scale(m2, nu, floor), lambda: lf.lambda })
}

impl ConditionalDensity for StudentTFit {
    fn n_features(&self) -> usize {
        self.beta.len() - 1
    }

    fn density(&self, x: &[f64], grid: &EvalGrid) -> Result<GridDensity> {
        check_dim(self.n_features(), x)?;
        let mu = linear_predictor(&self.beta, x);
        GridDensity::from_fn(*grid, |y| student_t_ln_pdf(y, mu, self.sigma, self.nu).exp())
    }
}
