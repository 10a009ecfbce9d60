use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use super::linear::{linear_predictor, LinearFit, RidgeConfig};
use super::scale_floor;
use crate::dataset::Dataset;
use crate::error::Result;
use crate::grid::{EvalGrid, GridDensity};
use crate::model::{check_dim, ConditionalDensity};
use crate::special::normal_pdf;

/// `Y | x ~ N(βᵀx, σ²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHomoFit {
    /// Intercept first.
    pub beta: Vec<f64>,
    pub sigma2: f64,
    pub lambda: Option<f64>,
}

/// Least squares (or LOO-tuned ridge) mean with residual variance
/// `RSS / (n - d - 1)`, or `RSS / n` under ridge.
pub fn fit_gauss_homo(ds: &Dataset, ridge: Option<&RidgeConfig>) -> Result<GaussHomoFit> {
    let lf = LinearFit::fit(&ds.features, &ds.response, ridge)?;
    let n = ds.n() as f64;
    let denom = if ridge.is_some() { n } else { n - ds.d() as f64 - 1.0 };
    let floor = scale_floor(&ds.response);
    let sigma2 = (lf.rss() / denom).max(floor * floor);
    Ok(GaussHomoFit { beta: lf.raw_coef(), sigma2, lambda: lf.lambda })
}

impl GaussHomoFit {
    pub fn mean(&self, x: &[f64]) -> f64 {
        linear_predictor(&self.beta, x)
    }
}

impl ConditionalDensity for GaussHomoFit {
    fn n_features(&self) -> usize {
        self.beta.len() - 1
    }

    fn density(&self, x: &[f64], grid: &EvalGrid) -> Result<GridDensity> {
        check_dim(self.n_features(), x)?;
        let (mu, sd) = (self.mean(x), self.sigma2.sqrt());
        GridDensity::from_fn(*grid, |y| normal_pdf(y, mu, sd))
    }
}
