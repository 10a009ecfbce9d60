use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{grow, Node, RegressionTree, SampleSet, TreeParams};
use crate::error::{CdeError, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GbtLoss {
    Squared,
    /// Pinball loss at level `tau`; leaves are refit to the tau-quantile of
    /// their residuals.
    Pinball(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbtParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams { rounds: 100, max_depth: 3, learning_rate: 0.1, min_leaf: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbtModel {
    init: f64,
    learning_rate: f64,
    loss: GbtLoss,
    trees: Vec<RegressionTree>,
}

impl GbtModel {
    pub fn loss(&self) -> GbtLoss {
        self.loss
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.init + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}

pub fn pinball_loss(tau: f64, y: f64, q: f64) -> f64 {
    let r = y - q;
    if r >= 0.0 {
        tau * r
    } else {
        (tau - 1.0) * r
    }
}

/// Smallest minimiser of the empirical pinball risk: the order statistic
/// `v_(ceil(tau * n))`.
pub fn empirical_quantile(values: &[f64], tau: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let k = libm::ceil(tau * n as f64 - 1e-9).clamp(1.0, n as f64) as usize;
    v[k - 1]
}

pub fn fit_gbt(x: &Matrix, y: &[f64], loss: GbtLoss, params: GbtParams, seed: u64) -> Result<GbtModel> {
    GbtData::new(x).fit(y, loss, params, seed)
}

/// Feature matrix with its per-feature sort, reusable across targets.
pub struct GbtData {
    samples: SampleSet,
    orders: Vec<Vec<u32>>,
    rows: usize,
    cols: usize,
}

impl GbtData {
    pub fn new(x: &Matrix) -> Self {
        let rows: Vec<usize> = (0..x.rows()).collect();
        let samples = SampleSet::new(x, &rows);
        let orders = samples.sorted_orders();
        GbtData { samples, orders, rows: x.rows(), cols: x.cols() }
    }

    pub fn fit(&self, y: &[f64], loss: GbtLoss, params: GbtParams, seed: u64) -> Result<GbtModel> {
        let tree_params = TreeParams { max_depth: params.max_depth, min_leaf: params.min_leaf, feature_fraction: 1.0 };
        if y.is_empty() {
            return Err(CdeError::Empty("training data"));
        }
        if self.rows != y.len() {
            return Err(CdeError::LengthMismatch { expected: self.rows, got: y.len() });
        }
        check_params(loss, params, tree_params)?;
        let n = y.len();
        let init = match loss {
            GbtLoss::Squared => y.iter().sum::<f64>() / n as f64,
            GbtLoss::Pinball(tau) => empirical_quantile(y, tau),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fitted = vec![init; n];
        let mut grad = vec![0.0; n];
        let mut trees = Vec::with_capacity(params.rounds);
        for _ in 0..params.rounds {
            for i in 0..n {
                let r = y[i] - fitted[i];
                grad[i] = match loss {
                    GbtLoss::Squared => r,
                    GbtLoss::Pinball(tau) if r >= 0.0 => tau,
                    GbtLoss::Pinball(tau) => tau - 1.0,
                };
            }
            let (mut tree, leaf_of) = grow(&self.samples, self.orders.clone(), &grad, tree_params, &mut rng);
            if let GbtLoss::Pinball(tau) = loss {
                let mut by_leaf: Vec<Vec<f64>> = vec![Vec::new(); tree.nodes().len()];
                for i in 0..n {
                    by_leaf[leaf_of[i]].push(y[i] - fitted[i]);
                }
                for (node, res) in by_leaf.iter().enumerate() {
                    if !res.is_empty() {
                        tree.set_leaf_value(node, empirical_quantile(res, tau));
                    }
                }
            }
            for i in 0..n {
                if let Node::Leaf { value } = tree.nodes()[leaf_of[i]] {
                    fitted[i] += params.learning_rate * value;
                }
            }
            trees.push(tree);
        }
        debug_assert!(trees.iter().all(|t| t.n_features() == self.cols));
        Ok(GbtModel { init, learning_rate: params.learning_rate, loss, trees })
    }
}

fn check_params(loss: GbtLoss, params: GbtParams, tree_params: TreeParams) -> Result<()> {
    if let GbtLoss::Pinball(tau) = loss {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(CdeError::invalid("pinball level must lie in (0, 1)"));
        }
    }
    if params.rounds == 0 {
        return Err(CdeError::invalid("boosting needs at least one round"));
    }
    if !(params.learning_rate > 0.0) {
        return Err(CdeError::invalid("learning rate must be positive"));
    }
    if tree_params.min_leaf == 0 {
        return Err(CdeError::invalid("min_leaf must be at least 1"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_order_statistic() {
        assert_eq!(empirical_quantile(&[3.0, 1.0, 2.0, 4.0], 0.5), 2.0);
        assert_eq!(empirical_quantile(&[3.0, 1.0, 2.0, 4.0], 0.51), 3.0);
        let v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(empirical_quantile(&v, 0.07), 7.0);
    }

    #[test]
    fn pinball_depth_zero_is_constant_quantile() {
        let ys = [1.0, 2.0, 3.0, 4.0, 5.0];
        let x = Matrix::from_vec(5, 1, ys.to_vec()).unwrap();
        let p = GbtParams { rounds: 1, max_depth: 0, ..Default::default() };
        assert_eq!(fit_gbt(&x, &ys, GbtLoss::Pinball(0.5), p, 0).unwrap().predict(&[0.0]), 3.0);
        assert_eq!(fit_gbt(&x, &ys, GbtLoss::Pinball(0.9), p, 0).unwrap().predict(&[0.0]), 5.0);
        assert!(fit_gbt(&x, &ys, GbtLoss::Pinball(1.0), p, 0).is_err());
    }

    #[test]
    fn single_deep_round_interpolates() {
        let xs: Vec<f64> = (0..32).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|v| 0.5 * v + 3.0).collect();
        let x = Matrix::from_vec(32, 1, xs).unwrap();
        let p = GbtParams { rounds: 1, max_depth: 5, learning_rate: 1.0, min_leaf: 1 };
        let m = fit_gbt(&x, &ys, GbtLoss::Squared, p, 0).unwrap();
        for i in 0..32 {
            assert!((m.predict(x.row(i)) - ys[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn pinball_model_hits_target_coverage() {
        let n = 400;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        // deterministic scatter in [-1, 1]
        let ys: Vec<f64> = (0..n).map(|i| libm::sin(i as f64 * 12.9898)).collect();
        let x = Matrix::from_vec(n, 1, xs).unwrap();
        let m = fit_gbt(&x, &ys, GbtLoss::Pinball(0.8), GbtParams::default(), 0).unwrap();
        let below = (0..n).filter(|&i| ys[i] <= m.predict(x.row(i))).count() as f64 / n as f64;
        assert!((below - 0.8).abs() < 0.08, "{below}");
    }
}
