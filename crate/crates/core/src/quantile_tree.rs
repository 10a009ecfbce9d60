//! Quantile-Tree: one pinball-loss boosted model per quantile level.

use alloc::vec::Vec;

use crate::dataset::Dataset;
use crate::encoding::{quantiles_to_density, QuantileFunction};
use crate::error::{CdeError, Result};
use crate::grid::{EvalGrid, GridDensity};
use crate::model::{check_dim, ConditionalDensity};
use crate::tree::{derive_seed, GbtData, GbtLoss, GbtModel, GbtParams};

pub const MIN_TRAIN: usize = 50;

/// `0.02, 0.04, …, 0.98`.
pub fn quantile_tree_levels() -> Vec<f64> {
    (1..=49).map(|k| k as f64 / 50.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileTreeFit {
    levels: Vec<f64>,
    models: Vec<GbtModel>,
    n_features: usize,
}

impl QuantileTreeFit {
    pub fn from_models(levels: Vec<f64>, models: Vec<GbtModel>, n_features: usize) -> Result<Self> {
        if levels.len() != models.len() {
            return Err(CdeError::LengthMismatch { expected: levels.len(), got: models.len() });
        }
        Ok(QuantileTreeFit { levels, models, n_features })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn models(&self) -> &[GbtModel] {
        &self.models
    }

    /// Raw model outputs, one per level, before sorting.
    pub fn raw_quantiles(&self, x: &[f64]) -> Vec<f64> {
        self.models.iter().map(|m| m.predict(x)).collect()
    }

    pub fn quantile_function(&self, x: &[f64]) -> Result<QuantileFunction> {
        check_dim(self.n_features, x)?;
        let q = self.raw_quantiles(x);
        if q.iter().any(|v| !v.is_finite()) {
            return Err(CdeError::NonFinite("quantile model output"));
        }
        QuantileFunction::new(self.levels.clone(), q)
    }
}

impl ConditionalDensity for QuantileTreeFit {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn density(&self, x: &[f64], grid: &EvalGrid) -> Result<GridDensity> {
        quantile_tree_predict(self, x, grid)
    }
}

/// All 49 levels share one hyperparameter setting.
pub fn fit_quantile_tree(ds: &Dataset, params: GbtParams, seed: u64) -> Result<QuantileTreeFit> {
    if ds.n() < MIN_TRAIN {
        return Err(CdeError::TooFewObservations { need: MIN_TRAIN, have: ds.n() });
    }
    let data = GbtData::new(&ds.features);
    let levels = quantile_tree_levels();
    let models = levels
        .iter()
        .enumerate()
        .map(|(k, &tau)| data.fit(&ds.response, GbtLoss::Pinball(tau), params, derive_seed(seed, k as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantileTreeFit { levels, models, n_features: ds.d() })
}

/// Sorts the level outputs and hands them to the quantile conversion.
pub fn quantile_tree_predict(fit: &QuantileTreeFit, x: &[f64], grid: &EvalGrid) -> Result<GridDensity> {
    quantiles_to_density(&fit.quantile_function(x)?, grid)
}
