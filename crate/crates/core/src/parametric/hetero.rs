//! Joint maximum likelihood for `Y | x ~ N(xᵀβ, exp(xᵀγ))`.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use super::linear::{check_xy, linear_predictor, Design, LinearFit, RidgeConfig, StdCoef};
use super::scale_floor;
use crate::dataset::Dataset;
use crate::error::Result;
use crate::grid::{EvalGrid, GridDensity};
use crate::linalg::{dot, Matrix};
use crate::model::{check_dim, ConditionalDensity};
use crate::optim::{minimize, LbfgsConfig};
use crate::special::normal_pdf;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussHeteroFit {
    /// Mean coefficients, intercept first.
    pub beta: Vec<f64>,
    /// Log-variance coefficients, intercept first.
    pub gamma: Vec<f64>,
    pub lambda: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// `‖∇‖∞` of the penalized negative log-likelihood at the returned
    /// iterate, in standardized coordinates.
    pub grad_inf_norm: f64,
    /// Floor on the predictive standard deviation.
    pub sd_floor: f64,
}

/// Penalized negative log-likelihood
/// `½ Σ [xᵢᵀγ + (yᵢ − xᵢᵀβ)² exp(−xᵢᵀγ)] + λ (‖β₁..‖² + ‖γ₁..‖²)`
/// for a design without intercept column; `beta[0]`/`gamma[0]` are the
/// (unpenalized) intercepts. When `grad` is given it receives
/// `(∂/∂β, ∂/∂γ)` concatenated.
pub fn hetero_objective(x: &Matrix, y: &[f64], beta: &[f64], gamma: &[f64], lambda: f64, grad: Option<&mut [f64]>) -> f64 {
    let p = x.cols() + 1;
    let mut value = 0.0;
    let mut gb = vec![0.0; p];
    let mut gg = vec![0.0; p];
    let want_grad = grad.is_some();
    for (row, &yi) in x.iter_rows().zip(y) {
        let mu = linear_predictor(beta, row);
        let eta = linear_predictor(gamma, row);
        let r = yi - mu;
        let w = (-eta).exp();
        let rw = r * r * w;
        value += 0.5 * (eta + rw);
        if want_grad {
            let a = -r * w;
            let b = 0.5 * (1.0 - rw);
            gb[0] += a;
            gg[0] += b;
            for (j, &xj) in row.iter().enumerate() {
                gb[j + 1] += a * xj;
                gg[j + 1] += b * xj;
            }
        }
    }
    value += lambda * (dot(&beta[1..], &beta[1..]) + dot(&gamma[1..], &gamma[1..]));
    if let Some(g) = grad {
        for j in 1..p {
            gb[j] += 2.0 * lambda * beta[j];
            gg[j] += 2.0 * lambda * gamma[j];
        }
        g[..p].copy_from_slice(&gb);
        g[p..2 * p].copy_from_slice(&gg);
    }
    value
}

/// Result of the joint fit in standardized coordinates.
pub(crate) struct HeteroStd {
    pub beta: StdCoef,
    pub gamma: StdCoef,
    pub converged: bool,
    pub iterations: usize,
    pub grad_inf_norm: f64,
}

/// Joint fit on an already-built design: OLS/ridge start for β, least
/// squares on log squared residuals for γ, then L-BFGS.
pub(crate) fn fit_hetero_design(design: &Design, y: &[f64], mean_start: &StdCoef, lambda: f64) -> Result<HeteroStd> {
    let n = design.n();
    let p = design.p() + 1;
    let fitted = design.fitted(mean_start);
    let floor = scale_floor(y);
    let log_sq: Vec<f64> = y.iter().zip(&fitted).map(|(yi, f)| ((yi - f).powi(2)).max(floor * floor).ln()).collect();
    let gamma_start = design.solve(&log_sq, lambda)?;

    let mut theta = Vec::with_capacity(2 * p);
    theta.push(mean_start.intercept);
    theta.extend_from_slice(&mean_start.slopes);
    theta.push(gamma_start.intercept);
    theta.extend_from_slice(&gamma_start.slopes);

    let xs = &design.xs;
    let objective = |t: &[f64], g: &mut [f64]| hetero_objective(xs, y, &t[..p], &t[p..], lambda, Some(g));
    let cfg = LbfgsConfig { max_iter: 500, grad_tol: 1e-6 * n as f64, memory: 10 };
    let m = minimize(objective, &theta, cfg);
    let split = |v: &[f64]| StdCoef { intercept: v[0], slopes: v[1..].to_vec() };
    Ok(HeteroStd {
        beta: split(&m.x[..p]),
        gamma: split(&m.x[p..]),
        converged: m.converged,
        iterations: m.iterations,
        grad_inf_norm: m.grad_inf_norm,
    })
}

/// Heteroscedastic Gaussian regression. Under ridge, the strength chosen by
/// LOO on the mean regression penalizes both coefficient vectors (not the
/// intercepts).
///
/// Non-convergence within the iteration budget is not an error: the best
/// iterate is returned with `converged = false`.
pub fn fit_gauss_hetero(ds: &Dataset, ridge: Option<&RidgeConfig>) -> Result<GaussHeteroFit> {
    check_xy(&ds.features, &ds.response)?;
    let lf = LinearFit::fit(&ds.features, &ds.response, ridge)?;
    let lambda = lf.lambda.unwrap_or(0.0);
    let h = fit_hetero_design(&lf.design, &ds.response, &lf.coef, lambda)?;
    Ok(GaussHeteroFit {
        beta: lf.design.to_raw(&h.beta),
        gamma: lf.design.to_raw(&h.gamma),
        lambda: lf.lambda,
        converged: h.converged,
        iterations: h.iterations,
        grad_inf_norm: h.grad_inf_norm,
        sd_floor: scale_floor(&ds.response),
    })
}

impl GaussHeteroFit {
    pub fn mean(&self, x: &[f64]) -> f64 {
        linear_predictor(&self.beta, x)
    }

    pub fn sd(&self, x: &[f64]) -> f64 {
        (0.5 * linear_predictor(&self.gamma, x)).exp().max(self.sd_floor)
    }
}

impl ConditionalDensity for GaussHeteroFit {
    fn n_features(&self) -> usize {
        self.beta.len() - 1
    }

    fn density(&self, x: &[f64], grid: &EvalGrid) -> Result<GridDensity> {
        check_dim(self.n_features(), x)?;
        let (mu, sd) = (self.mean(x), self.sd(x));
        GridDensity::from_fn(*grid, |y| normal_pdf(y, mu, sd))
    }
}
