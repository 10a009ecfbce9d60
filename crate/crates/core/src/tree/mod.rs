//! CART regression trees and the two ensembles built from them.
//!
//! Split search is exhaustive over the sorted distinct values of each
//! candidate feature. Each feature's sample order is sorted once per tree
//! and then stably partitioned as the tree grows, so no node re-sorts.

mod forest;
mod gbt;

pub use forest::{fit_forest, fit_forests, ForestParams, RegressionForest};
pub use gbt::{empirical_quantile, fit_gbt, pinball_loss, GbtData, GbtLoss, GbtModel, GbtParams};

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CdeError, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Leaf { value: f64 },
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    n_features: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Fraction of features considered at each split (at least one).
    pub feature_fraction: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: 8, min_leaf: 1, feature_fraction: 1.0 }
    }
}

impl RegressionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn leaf_of(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_of(x)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub(crate) fn set_leaf_value(&mut self, node: usize, value: f64) {
        if let Node::Leaf { value: v } = &mut self.nodes[node] {
            *v = value;
        }
    }
}

/// Greedy variance-reduction tree on all rows of `x`.
pub fn fit_regression_tree(x: &Matrix, y: &[f64], params: TreeParams, seed: u64) -> Result<RegressionTree> {
    check_training(x, y, params)?;
    let rows: Vec<usize> = (0..x.rows()).collect();
    let samples = SampleSet::new(x, &rows);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(grow(&samples, samples.sorted_orders(), y, params, &mut rng).0)
}

pub(crate) fn check_training(x: &Matrix, y: &[f64], params: TreeParams) -> Result<()> {
    if y.is_empty() {
        return Err(CdeError::Empty("training data"));
    }
    if x.rows() != y.len() {
        return Err(CdeError::LengthMismatch { expected: x.rows(), got: y.len() });
    }
    if params.min_leaf == 0 {
        return Err(CdeError::invalid("min_leaf must be at least 1"));
    }
    if !(params.feature_fraction > 0.0 && params.feature_fraction <= 1.0) {
        return Err(CdeError::invalid("feature_fraction must lie in (0, 1]"));
    }
    Ok(())
}

/// Training rows laid out column-major by sample position (bootstrap
/// samples may repeat rows).
pub(crate) struct SampleSet {
    columns: Vec<Vec<f64>>,
    n: usize,
}

impl SampleSet {
    pub fn new(x: &Matrix, rows: &[usize]) -> Self {
        let columns = (0..x.cols()).map(|f| rows.iter().map(|&r| x[(r, f)]).collect()).collect();
        SampleSet { columns, n: rows.len() }
    }

    /// Per feature, sample positions sorted by value (ties by position).
    pub fn sorted_orders(&self) -> Vec<Vec<u32>> {
        self.columns
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..self.n as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect()
    }
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
    n_left: usize,
}

/// Grows a tree over `samples` with per-position `targets`. Consumes the
/// presorted orders and returns, alongside the tree, the leaf node of every
/// sample position.
pub(crate) fn grow(
    samples: &SampleSet,
    mut orders: Vec<Vec<u32>>,
    targets: &[f64],
    params: TreeParams,
    rng: &mut ChaCha8Rng,
) -> (RegressionTree, Vec<usize>) {
    let d = samples.columns.len();
    let n_try = ((params.feature_fraction * d as f64 + 0.5) as usize).clamp(1, d.max(1));
    let mut builder = Builder {
        samples,
        targets,
        params,
        n_try,
        nodes: Vec::new(),
        leaf_of: vec![0; samples.n],
        goes_left: vec![false; samples.n],
        scratch: Vec::with_capacity(samples.n),
        features: (0..d).collect(),
    };
    builder.build(&mut orders, 0, samples.n, 0, rng);
    let Builder { nodes, leaf_of, .. } = builder;
    (RegressionTree { nodes, n_features: d }, leaf_of)
}

struct Builder<'a> {
    samples: &'a SampleSet,
    targets: &'a [f64],
    params: TreeParams,
    n_try: usize,
    nodes: Vec<Node>,
    leaf_of: Vec<usize>,
    goes_left: Vec<bool>,
    scratch: Vec<u32>,
    features: Vec<usize>,
}

impl Builder<'_> {
    fn build(&mut self, orders: &mut [Vec<u32>], start: usize, end: usize, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let id = self.nodes.len();
        let members = &orders[0][start..end];
        let m = members.len();
        let (sum, sum_sq) = members.iter().fold((0.0, 0.0), |(s, q), &p| {
            let t = self.targets[p as usize];
            (s + t, q + t * t)
        });
        let mean = sum / m as f64;
        self.nodes.push(Node::Leaf { value: mean });

        if depth >= self.params.max_depth || m < 2 * self.params.min_leaf {
            self.mark_leaf(&orders[0][start..end], id);
            return id;
        }
        let best = self.best_split(orders, start, end, sum, rng);
        let best = match best {
            Some(b) if b.gain > 1e-12 * sum_sq.max(f64::MIN_POSITIVE) => b,
            _ => {
                self.mark_leaf(&orders[0][start..end], id);
                return id;
            }
        };

        let col = &self.samples.columns[best.feature];
        for &p in &orders[0][start..end] {
            self.goes_left[p as usize] = col[p as usize] <= best.threshold;
        }
        for order in orders.iter_mut() {
            stable_partition(&mut order[start..end], &self.goes_left, &mut self.scratch);
        }
        let mid = start + best.n_left;
        let left = self.build(orders, start, mid, depth + 1, rng);
        let right = self.build(orders, mid, end, depth + 1, rng);
        self.nodes[id] = Node::Split { feature: best.feature, threshold: best.threshold, left, right };
        id
    }

    fn mark_leaf(&mut self, members: &[u32], id: usize) {
        for &p in members {
            self.leaf_of[p as usize] = id;
        }
    }

    fn best_split(&mut self, orders: &[Vec<u32>], start: usize, end: usize, sum: f64, rng: &mut ChaCha8Rng) -> Option<BestSplit> {
        let d = self.features.len();
        let candidates: &[usize] = if self.n_try < d {
            // partial Fisher-Yates, then scan in index order
            for i in 0..self.n_try {
                let j = rng.random_range(i..d);
                self.features.swap(i, j);
            }
            self.features[..self.n_try].sort_unstable();
            &self.features[..self.n_try]
        } else {
            self.features.sort_unstable();
            &self.features
        };
        let m = end - start;
        let parent = sum * sum / m as f64;
        let min_leaf = self.params.min_leaf;
        let mut best: Option<BestSplit> = None;
        for &f in candidates {
            let col = &self.samples.columns[f];
            let order = &orders[f][start..end];
            let mut left_sum = 0.0;
            for k in 0..m - 1 {
                let p = order[k] as usize;
                left_sum += self.targets[p];
                let n_left = k + 1;
                if n_left < min_leaf || m - n_left < min_leaf {
                    continue;
                }
                let (a, b) = (col[p], col[order[k + 1] as usize]);
                if a >= b {
                    continue;
                }
                let right_sum = sum - left_sum;
                let gain = left_sum * left_sum / n_left as f64 + right_sum * right_sum / (m - n_left) as f64 - parent;
                if best.as_ref().is_none_or(|bs| gain > bs.gain) {
                    let mut threshold = 0.5 * (a + b);
                    if threshold >= b {
                        threshold = a;
                    }
                    best = Some(BestSplit { feature: f, threshold, gain, n_left });
                }
            }
        }
        best
    }
}

/// Moves `true` entries to the front, preserving relative order on both
/// sides.
fn stable_partition(slice: &mut [u32], goes_left: &[bool], scratch: &mut Vec<u32>) {
    scratch.clear();
    let mut w = 0;
    for i in 0..slice.len() {
        let p = slice[i];
        if goes_left[p as usize] {
            slice[w] = p;
            w += 1;
        } else {
            scratch.push(p);
        }
    }
    slice[w..].copy_from_slice(scratch);
}

/// SplitMix64 finalizer, used to derive independent child seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
