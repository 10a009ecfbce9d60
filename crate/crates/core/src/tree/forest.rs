use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_training, derive_seed, grow, RegressionTree, SampleSet, TreeParams};
use crate::error::{CdeError, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// `None` means one third of the features, rounded, at least one.
    pub feature_fraction: Option<f64>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 100, max_depth: 8, min_leaf: 5, feature_fraction: None }
    }
}

/// Bagged regression trees; each tree sees a bootstrap sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionForest {
    trees: Vec<RegressionTree>,
}

impl RegressionForest {
    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

pub fn fit_forest(x: &Matrix, y: &[f64], params: ForestParams, seed: u64) -> Result<RegressionForest> {
    Ok(fit_forests(x, &[y], params, seed)?.remove(0))
}

/// One forest per target column. Every forest is identical to
/// `fit_forest(x, target, params, seed)`; the bootstrap draws and the
/// per-feature sort are shared across targets.
pub fn fit_forests(x: &Matrix, targets: &[&[f64]], params: ForestParams, seed: u64) -> Result<Vec<RegressionForest>> {
    let d = x.cols().max(1);
    let fraction = params
        .feature_fraction
        .unwrap_or_else(|| libm::floor(d as f64 / 3.0 + 0.5).max(1.0) / d as f64);
    let tree_params = TreeParams { max_depth: params.max_depth, min_leaf: params.min_leaf, feature_fraction: fraction };
    if targets.is_empty() {
        return Err(CdeError::Empty("forest targets"));
    }
    for y in targets {
        check_training(x, y, tree_params)?;
    }
    if params.n_trees == 0 {
        return Err(CdeError::invalid("forest needs at least one tree"));
    }
    let n = x.rows();
    let mut forests: Vec<Vec<RegressionTree>> = targets.iter().map(|_| Vec::with_capacity(params.n_trees)).collect();
    let mut boot = vec![0.0; n];
    for t in 0..params.n_trees {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, t as u64));
        let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let samples = SampleSet::new(x, &rows);
        let orders = samples.sorted_orders();
        for (y, trees) in targets.iter().zip(forests.iter_mut()) {
            for (b, &r) in boot.iter_mut().zip(&rows) {
                *b = y[r];
            }
            let mut tree_rng = rng.clone();
            trees.push(grow(&samples, orders.clone(), &boot, tree_params, &mut tree_rng).0);
        }
    }
    Ok(forests.into_iter().map(|trees| RegressionForest { trees }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_reasonable() {
        let xs: Vec<f64> = (0..200).map(|i| i as f64 / 200.0).collect();
        let ys: Vec<f64> = xs.iter().map(|v| 3.0 * v).collect();
        let x = Matrix::from_vec(200, 1, xs).unwrap();
        let p = ForestParams { n_trees: 20, ..Default::default() };
        let a = fit_forest(&x, &ys, p, 7).unwrap();
        let b = fit_forest(&x, &ys, p, 7).unwrap();
        assert_eq!(a, b);
        assert!((a.predict(&[0.5]) - 1.5).abs() < 0.1);
    }

    #[test]
    fn shared_fit_matches_individual_fits() {
        let xs: Vec<f64> = (0..90).map(|i| libm::sin(i as f64)).chain((0..90).map(|i| i as f64)).collect();
        let x = Matrix::from_vec(90, 2, xs).unwrap();
        let y1: Vec<f64> = (0..90).map(|i| (i % 7) as f64).collect();
        let y2: Vec<f64> = (0..90).map(|i| libm::cos(i as f64 * 0.3)).collect();
        let p = ForestParams { n_trees: 5, feature_fraction: Some(0.5), ..Default::default() };
        let both = fit_forests(&x, &[&y1, &y2], p, 3).unwrap();
        assert_eq!(both[0], fit_forest(&x, &y1, p, 3).unwrap());
        assert_eq!(both[1], fit_forest(&x, &y2, p, 3).unwrap());
    }
}
