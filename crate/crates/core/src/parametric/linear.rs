//! Least squares and ridge regression on a standardized design with an
//! unpenalized intercept, plus closed-form leave-one-out selection of the
//! ridge strength.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::dataset::Standardizer;
use crate::error::{CdeError, Result};
use crate::linalg::{dot, symmetric_eigen, Matrix};

/// Candidate ridge strengths, searched by leave-one-out error.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeConfig {
    lambdas: Vec<f64>,
}

impl RidgeConfig {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(CdeError::Empty("ridge lambdas"));
        }
        if lambdas.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(CdeError::invalid("ridge lambdas must be finite and non-negative"));
        }
        Ok(RidgeConfig { lambdas })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }
}

impl Default for RidgeConfig {
    /// 20 log-spaced values from 1e-4 to 1e4.
    fn default() -> Self {
        let lambdas = (0..20).map(|i| 10f64.powf(-4.0 + 8.0 * i as f64 / 19.0)).collect();
        RidgeConfig { lambdas }
    }
}

/// A standardized design, eigen-decomposed once so that any number of ridge
/// strengths can be solved cheaply.
#[derive(Debug, Clone)]
pub(crate) struct Design {
    pub std: Standardizer,
    /// Indices of non-constant raw columns.
    pub active: Vec<usize>,
    /// Standardized active columns.
    pub xs: Matrix,
    eigvals: Vec<f64>,
    eigvecs: Matrix,
    /// `xs * eigvecs`
    rotated: Matrix,
}

/// Coefficients in standardized coordinates: intercept then one per active
/// column.
#[derive(Debug, Clone)]
pub(crate) struct StdCoef {
    pub intercept: f64,
    pub slopes: Vec<f64>,
}

impl Design {
    pub fn new(x: &Matrix) -> Self {
        let std = Standardizer::fit(x);
        let active: Vec<usize> = (0..x.cols()).filter(|&j| !std.constant[j]).collect();
        let mut xs = Matrix::zeros(x.rows(), active.len());
        let mut buf = vec![0.0; x.cols()];
        for i in 0..x.rows() {
            std.transform_row(x.row(i), &mut buf);
            let dst = xs.row_mut(i);
            for (k, &j) in active.iter().enumerate() {
                dst[k] = buf[j];
            }
        }
        let (eigvals, eigvecs) = symmetric_eigen(&xs.gram());
        let rotated = xs.matmul(&eigvecs);
        Design { std, active, xs, eigvals, eigvecs, rotated }
    }

    pub fn n(&self) -> usize {
        self.xs.rows()
    }

    pub fn p(&self) -> usize {
        self.xs.cols()
    }

    fn max_eig(&self) -> f64 {
        self.eigvals.iter().copied().fold(0.0, f64::max)
    }

    /// Whether `λ` leaves every direction of the design well determined.
    fn well_posed(&self, lambda: f64) -> bool {
        let floor = 1e-10 * self.max_eig().max(1e-300);
        self.eigvals.iter().all(|&e| e + lambda > floor)
    }

    /// Penalized least squares at strength `lambda`. Returns coefficients
    /// and the rotated-space shrinkage weights `1 / (e_k + λ)`.
    pub fn solve(&self, y: &[f64], lambda: f64) -> Result<StdCoef> {
        if !self.well_posed(lambda) {
            return Err(CdeError::RankDeficient);
        }
        let n = self.n() as f64;
        let ybar = y.iter().sum::<f64>() / n;
        let yc: Vec<f64> = y.iter().map(|v| v - ybar).collect();
        let u = self.rotated.t_mul_vec(&yc);
        let w: Vec<f64> = u.iter().zip(&self.eigvals).map(|(uk, e)| uk / (e + lambda)).collect();
        let slopes = self.eigvecs.mul_vec(&w);
        // columns are centered, so the intercept is the response mean
        Ok(StdCoef { intercept: ybar, slopes })
    }

    pub fn fitted(&self, c: &StdCoef) -> Vec<f64> {
        self.xs.iter_rows().map(|r| c.intercept + dot(r, &c.slopes)).collect()
    }

    /// Sum of squared leave-one-out residuals at `lambda`, via the hat-matrix
    /// diagonal. `None` when some `h_ii` reaches 1 or the system is singular.
    pub fn loo_error(&self, y: &[f64], lambda: f64) -> Option<f64> {
        let c = self.solve(y, lambda).ok()?;
        let inv: Vec<f64> = self.eigvals.iter().map(|e| 1.0 / (e + lambda)).collect();
        let n = self.n() as f64;
        let mut total = 0.0;
        for (i, r) in self.rotated.iter_rows().enumerate() {
            let h = 1.0 / n + r.iter().zip(&inv).map(|(z, w)| z * z * w).sum::<f64>();
            if h >= 1.0 - 1e-12 {
                return None;
            }
            let resid = y[i] - (c.intercept + dot(self.xs.row(i), &c.slopes));
            total += (resid / (1.0 - h)).powi(2);
        }
        Some(total)
    }

    /// Picks the strength with the smallest LOO error (ties go to the smaller
    /// λ) and solves at it.
    pub fn solve_loo(&self, y: &[f64], cfg: &RidgeConfig) -> Result<(StdCoef, f64)> {
        let mut order: Vec<f64> = cfg.lambdas().to_vec();
        order.sort_by(f64::total_cmp);
        let mut best: Option<(f64, f64)> = None;
        for &lam in &order {
            if let Some(err) = self.loo_error(y, lam) {
                if best.is_none_or(|(_, e)| err < e) {
                    best = Some((lam, err));
                }
            }
        }
        let (lam, _) = best.ok_or(CdeError::RankDeficient)?;
        Ok((self.solve(y, lam)?, lam))
    }

    /// Raw-space coefficients `(intercept, one per raw column)`; constant
    /// columns get zero.
    pub fn to_raw(&self, c: &StdCoef) -> Vec<f64> {
        let d = self.std.means.len();
        let mut full = vec![0.0; d + 1];
        full[0] = c.intercept;
        for (k, &j) in self.active.iter().enumerate() {
            full[j + 1] = c.slopes[k];
        }
        self.std.unscale_coefficients(&full)
    }
}

/// Ridge regression with the strength chosen by leave-one-out error over
/// `config`. Returns raw-space coefficients (intercept first) and the chosen
/// λ.
pub fn ridge_solve_loo(x: &Matrix, y: &[f64], config: &RidgeConfig) -> Result<(Vec<f64>, f64)> {
    check_xy(x, y)?;
    let design = Design::new(x);
    let (c, lam) = design.solve_loo(y, config)?;
    Ok((design.to_raw(&c), lam))
}

/// LOO error at every λ of `lambdas` for an already-standardized design
/// `xs` (intercept handled internally, unpenalized). `None` entries mark
/// strengths where the closed form is undefined.
pub fn ridge_loo_path(xs: &Matrix, y: &[f64], lambdas: &[f64]) -> Result<Vec<Option<f64>>> {
    check_xy(xs, y)?;
    let design = Design::new(xs);
    Ok(lambdas.iter().map(|&l| design.loo_error(y, l)).collect())
}

pub(crate) fn check_xy(x: &Matrix, y: &[f64]) -> Result<()> {
    if x.rows() != y.len() {
        return Err(CdeError::LengthMismatch { expected: x.rows(), got: y.len() });
    }
    if y.is_empty() {
        return Err(CdeError::Empty("training data"));
    }
    if x.as_slice().iter().chain(y).any(|v| !v.is_finite()) {
        return Err(CdeError::NonFinite("training data"));
    }
    Ok(())
}

/// `coef[0] + Σ coef[j+1] x[j]`
pub(crate) fn linear_predictor(coef: &[f64], x: &[f64]) -> f64 {
    coef[0] + dot(&coef[1..], x)
}

/// Least-squares fit used by every family: OLS when `ridge` is `None`
/// (refusing under-determined or rank-deficient designs), otherwise ridge
/// with LOO-selected strength.
#[derive(Debug, Clone)]
pub(crate) struct LinearFit {
    pub design: Design,
    pub coef: StdCoef,
    pub lambda: Option<f64>,
    pub residuals: Vec<f64>,
}

impl LinearFit {
    pub fn fit(x: &Matrix, y: &[f64], ridge: Option<&RidgeConfig>) -> Result<Self> {
        check_xy(x, y)?;
        let (n, d) = (x.rows(), x.cols());
        if ridge.is_none() && n <= d + 1 {
            return Err(CdeError::TooFewObservations { need: d + 2, have: n });
        }
        let design = Design::new(x);
        let (coef, lambda) = match ridge {
            None => (design.solve(y, 0.0)?, None),
            Some(cfg) => {
                let (c, l) = design.solve_loo(y, cfg)?;
                (c, Some(l))
            }
        };
        let residuals = design.fitted(&coef).iter().zip(y).map(|(f, yi)| yi - f).collect();
        Ok(LinearFit { design, coef, lambda, residuals })
    }

    pub fn raw_coef(&self) -> Vec<f64> {
        self.design.to_raw(&self.coef)
    }

    pub fn rss(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum()
    }
}
