//! Random-search tuning: 8 draws from a discrete grid, scored by mean 3-fold
//! CDE loss on the training data.

use std::collections::BTreeMap;

use cde_core::scoring::cde_loss;
use cde_core::{ConditionalDensity, Dataset, EvalGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HarnessError, Result};

pub const DRAWS: usize = 8;
pub const FOLDS: usize = 3;

/// Named hyperparameter values; integers are stored as whole floats.
pub type Hyper = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub axes: Vec<(&'static str, Vec<f64>)>,
}

impl SearchSpace {
    pub fn mdn() -> Self {
        SearchSpace {
            axes: vec![
                ("components", vec![2.0, 3.0, 5.0]),
                ("hidden", vec![16.0, 32.0, 64.0]),
                ("learning_rate", vec![0.005, 0.01, 0.02]),
                ("epochs", vec![300.0, 500.0, 800.0]),
            ],
        }
    }

    pub fn catmlp() -> Self {
        SearchSpace {
            axes: vec![
                ("n_bins", vec![30.0, 50.0, 100.0]),
                ("hidden", vec![32.0, 64.0, 128.0]),
                ("learning_rate", vec![0.005, 0.01, 0.02]),
                ("epochs", vec![300.0, 500.0, 800.0]),
            ],
        }
    }

    pub fn quantile_tree() -> Self {
        SearchSpace {
            axes: vec![
                ("rounds", vec![50.0, 100.0, 200.0]),
                ("max_depth", vec![3.0, 4.0, 6.0]),
                ("learning_rate", vec![0.05, 0.1, 0.2]),
            ],
        }
    }

    pub fn size(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len()).product()
    }

    /// `DRAWS` configurations, each axis sampled uniformly and
    /// independently (with replacement across draws).
    pub fn draw(&self, seed: u64) -> Vec<Hyper> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..DRAWS)
            .map(|_| self.axes.iter().map(|(k, v)| (k.to_string(), v[rng.random_range(0..v.len())])).collect())
            .collect()
    }
}

/// Fold of training position `p`.
fn fold_of(p: usize) -> usize {
    p % FOLDS
}

/// Mean held-out CDE loss of `fit` over the folds of `ds`.
pub fn cv_loss<F>(ds: &Dataset, grid: &EvalGrid, hyper: &Hyper, seed: u64, fit: &F) -> Result<f64>
where
    F: Fn(&Dataset, &Hyper, u64) -> Result<Box<dyn ConditionalDensity>>,
{
    let mut total = 0.0;
    for f in 0..FOLDS {
        let (train, test): (Vec<usize>, Vec<usize>) = (0..ds.n()).partition(|&p| fold_of(p) != f);
        let model = fit(&ds.subset(&train), hyper, seed)?;
        let held = ds.subset(&test);
        total += cde_loss(&model.densities(&held.features, grid)?, &held.response)?;
    }
    Ok(total / FOLDS as f64)
}

/// Draws configurations and returns the one with the lowest CV loss
/// (first drawn on ties). A configuration whose fit fails scores +inf; if
/// every draw fails the first error is returned.
pub fn tune<F>(space: &SearchSpace, ds: &Dataset, grid: &EvalGrid, seed: u64, fit: F) -> Result<Hyper>
where
    F: Fn(&Dataset, &Hyper, u64) -> Result<Box<dyn ConditionalDensity>>,
{
    if ds.n() < 2 * FOLDS {
        return Err(HarnessError::invalid(format!("{} training rows are too few for {FOLDS}-fold tuning", ds.n())));
    }
    let mut best: Option<(f64, Hyper)> = None;
    let mut first_err = None;
    for hyper in space.draw(seed) {
        let loss = match cv_loss(ds, grid, &hyper, seed, &fit) {
            Ok(l) if l.is_finite() => l,
            Ok(_) => f64::INFINITY,
            Err(e) => {
                first_err.get_or_insert(e);
                f64::INFINITY
            }
        };
        if best.as_ref().is_none_or(|(b, _)| loss < *b) {
            best = Some((loss, hyper));
        }
    }
    match (best, first_err) {
        (Some((l, h)), _) if l.is_finite() => Ok(h),
        (_, Some(e)) => Err(e),
        _ => Err(HarnessError::invalid("no tuning configuration produced a finite loss")),
    }
}
