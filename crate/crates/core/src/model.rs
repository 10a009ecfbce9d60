use alloc::vec::Vec;

use crate::error::Result;
use crate::grid::{EvalGrid, GridDensity};
use crate::linalg::Matrix;

/// A fitted conditional density estimator.
pub trait ConditionalDensity {
    /// Number of raw covariates the model expects.
    fn n_features(&self) -> usize;

    /// Predictive density for one covariate row, normalized on `grid`.
    fn density(&self, x: &[f64], grid: &EvalGrid) -> Result<GridDensity>;

    fn densities(&self, x: &Matrix, grid: &EvalGrid) -> Result<Vec<GridDensity>> {
        x.iter_rows().map(|r| self.density(r, grid)).collect()
    }
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(crate::CdeError::LengthMismatch { expected, got: x.len() });
    }
    Ok(())
}
