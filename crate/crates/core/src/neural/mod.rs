//! Small fully connected ReLU networks trained with Adam and early stopping,
//! and the two density heads built on them.

mod catmlp;
mod mdn;

pub use catmlp::{catmlp_density, catmlp_fit, catmlp_loss, catmlp_objective, CatMlpConfig, CatMlpFit};
pub use mdn::{mdn_density, mdn_fit, mdn_loss, mdn_objective, MdnConfig, MdnFit, MdnMixture, LOG_SD_FLOOR};

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CdeError, Result};
use crate::linalg::Matrix;

/// Layer widths, input first. Hidden layers use ReLU, the output is linear.
///
/// Parameters live in one flat vector: for each layer the weight matrix
/// (`out × in`, row-major) followed by the bias.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mlp {
    sizes: Vec<usize>,
}

impl Mlp {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(CdeError::invalid("network needs at least two non-empty layers"));
        }
        Ok(Mlp { sizes })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        for w in self.sizes.windows(2) {
            let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
            p.extend((0..w[0] * w[1]).map(|_| rng.random_range(-limit..limit)));
            p.extend(core::iter::repeat_n(0.0, w[1]));
        }
        p
    }

    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut off = 0;
        self.sizes.windows(2).map(move |w| {
            let start = off;
            off += w[1] * (w[0] + 1);
            (start, w[0], w[1])
        })
    }

    /// Forward pass over a batch of `rows` inputs (row-major); the outputs
    /// are left in `ws.output()`.
    pub fn forward(&self, params: &[f64], x: &[f64], rows: usize, ws: &mut Workspace) {
        debug_assert_eq!(params.len(), self.n_params());
        ws.prepare(self, rows);
        ws.acts[0][..rows * self.sizes[0]].copy_from_slice(&x[..rows * self.sizes[0]]);
        let n_layers = self.sizes.len() - 1;
        for (l, (off, n_in, n_out)) in self.layers().enumerate() {
            let w = &params[off..off + n_in * n_out];
            let b = &params[off + n_in * n_out..off + n_in * n_out + n_out];
            // transposed copy so the inner loop is a contiguous axpy
            let wt = &mut ws.wt;
            wt.resize(n_in * n_out, 0.0);
            for j in 0..n_out {
                for k in 0..n_in {
                    wt[k * n_out + j] = w[j * n_in + k];
                }
            }
            let (before, after) = ws.acts.split_at_mut(l + 1);
            let input = &before[l][..rows * n_in];
            let output = &mut after[0][..rows * n_out];
            for i in 0..rows {
                let a = &input[i * n_in..(i + 1) * n_in];
                let z = &mut output[i * n_out..(i + 1) * n_out];
                z.copy_from_slice(b);
                for (k, &ak) in a.iter().enumerate() {
                    if ak != 0.0 {
                        let row = &wt[k * n_out..(k + 1) * n_out];
                        for (zj, wj) in z.iter_mut().zip(row) {
                            *zj += ak * wj;
                        }
                    }
                }
                if l + 1 < n_layers {
                    for v in z.iter_mut() {
                        if *v < 0.0 {
                            *v = 0.0;
                        }
                    }
                }
            }
        }
        ws.rows = rows;
    }

    /// Accumulates into `grad` the parameter gradient given `d_out`, the
    /// loss gradient with respect to the outputs of the last forward pass.
    pub fn backward(&self, params: &[f64], ws: &mut Workspace, d_out: &[f64], grad: &mut [f64]) {
        let rows = ws.rows;
        let layers: Vec<_> = self.layers().collect();
        ws.delta.clear();
        ws.delta.extend_from_slice(&d_out[..rows * self.n_outputs()]);
        for (l, &(off, n_in, n_out)) in layers.iter().enumerate().rev() {
            let input = &ws.acts[l][..rows * n_in];
            let (gw, gb) = grad[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            for i in 0..rows {
                let a = &input[i * n_in..(i + 1) * n_in];
                let d = &ws.delta[i * n_out..(i + 1) * n_out];
                for (j, &dj) in d.iter().enumerate() {
                    if dj != 0.0 {
                        gb[j] += dj;
                        for (g, ak) in gw[j * n_in..(j + 1) * n_in].iter_mut().zip(a) {
                            *g += dj * ak;
                        }
                    }
                }
            }
            if l == 0 {
                break;
            }
            let w = &params[off..off + n_in * n_out];
            ws.prev.clear();
            ws.prev.resize(rows * n_in, 0.0);
            for i in 0..rows {
                let d = &ws.delta[i * n_out..(i + 1) * n_out];
                let p = &mut ws.prev[i * n_in..(i + 1) * n_in];
                for (j, &dj) in d.iter().enumerate() {
                    if dj != 0.0 {
                        for (pk, wk) in p.iter_mut().zip(&w[j * n_in..(j + 1) * n_in]) {
                            *pk += dj * wk;
                        }
                    }
                }
                // ReLU mask from the post-activation
                for (pk, ak) in p.iter_mut().zip(&input[i * n_in..(i + 1) * n_in]) {
                    if *ak <= 0.0 {
                        *pk = 0.0;
                    }
                }
            }
            core::mem::swap(&mut ws.delta, &mut ws.prev);
        }
    }

    pub fn predict(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        let mut ws = Workspace::default();
        self.forward(params, x, 1, &mut ws);
        ws.output().to_vec()
    }
}

/// Scratch buffers reused across forward/backward passes.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    acts: Vec<Vec<f64>>,
    wt: Vec<f64>,
    delta: Vec<f64>,
    prev: Vec<f64>,
    rows: usize,
    out_width: usize,
}

impl Workspace {
    fn prepare(&mut self, mlp: &Mlp, rows: usize) {
        self.acts.resize(mlp.sizes.len(), Vec::new());
        for (a, &s) in self.acts.iter_mut().zip(&mlp.sizes) {
            if a.len() < rows * s {
                a.resize(rows * s, 0.0);
            }
        }
        self.out_width = mlp.n_outputs();
    }

    pub fn output(&self) -> &[f64] {
        &self.acts.last().expect("forward pass ran")[..self.rows * self.out_width]
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        Adam { learning_rate, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let step = self.learning_rate * c2.sqrt() / c1;
        let eps = self.eps * c2.sqrt();
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= step * self.m[i] / (self.v[i].sqrt() + eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Upper bound on epochs; early stopping may end training sooner.
    pub max_epochs: usize,
    /// `None`: full batch up to 1024 training rows, 256 beyond.
    pub batch_size: Option<usize>,
    pub val_fraction: f64,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 0.01, max_epochs: 500, batch_size: None, val_fraction: 0.1, patience: 30, seed: 0 }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(CdeError::invalid("learning rate must be positive"));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(CdeError::invalid("validation fraction must lie in (0, 1)"));
        }
        if self.patience == 0 || self.max_epochs == 0 || self.batch_size == Some(0) {
            return Err(CdeError::invalid("patience, epochs and batch size must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub first_val_loss: f64,
    pub best_val_loss: f64,
}

/// A batch loss on network outputs: returns the mean loss over `rows` and,
/// if asked, writes its gradient with respect to the outputs.
pub(crate) trait BatchLoss {
    fn loss(&self, outputs: &[f64], rows: &[usize], d_out: Option<&mut [f64]>) -> f64;
}

/// Adam on a random 90/10 split with patience-based early stopping; returns
/// the parameters with the best validation loss.
pub(crate) fn train(mlp: &Mlp, x: &Matrix, loss: &impl BatchLoss, cfg: &TrainConfig) -> Result<(Vec<f64>, TrainReport)> {
    cfg.validate()?;
    let n = x.rows();
    let d = mlp.n_inputs();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = mlp.init(&mut rng);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let n_val = libm::round(cfg.val_fraction * n as f64).clamp(1.0, (n - 1) as f64) as usize;
    let (val_idx, train_idx) = perm.split_at(n_val);
    let mut train_idx = train_idx.to_vec();
    let val_idx = val_idx.to_vec();
    let batch = cfg.batch_size.unwrap_or(if train_idx.len() <= 1024 { train_idx.len() } else { 256 });

    let gather = |idx: &[usize], buf: &mut Vec<f64>| {
        buf.clear();
        for &i in idx {
            buf.extend_from_slice(x.row(i));
        }
    };
    let mut x_val = Vec::with_capacity(n_val * d);
    gather(&val_idx, &mut x_val);

    let mut ws = Workspace::default();
    let mut adam = Adam::new(params.len(), cfg.learning_rate);
    let mut grad = vec![0.0; params.len()];
    let mut d_out = Vec::new();
    let mut xb = Vec::with_capacity(batch * d);

    let eval_val = |params: &[f64], ws: &mut Workspace| {
        mlp.forward(params, &x_val, val_idx.len(), ws);
        loss.loss(ws.output(), &val_idx, None)
    };

    let mut best = params.clone();
    let mut best_val = f64::INFINITY;
    let mut first_val = f64::NAN;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut epochs_run = 0;
    for epoch in 1..=cfg.max_epochs {
        train_idx.shuffle(&mut rng);
        for chunk in train_idx.chunks(batch) {
            gather(chunk, &mut xb);
            mlp.forward(&params, &xb, chunk.len(), &mut ws);
            d_out.clear();
            d_out.resize(chunk.len() * mlp.n_outputs(), 0.0);
            let l = loss.loss(ws.output(), chunk, Some(&mut d_out));
            if !l.is_finite() {
                return Err(CdeError::Diverged(alloc::format!("non-finite training loss at epoch {epoch}")));
            }
            grad.iter_mut().for_each(|g| *g = 0.0);
            mlp.backward(&params, &mut ws, &d_out, &mut grad);
            adam.step(&mut params, &grad);
        }
        epochs_run = epoch;
        let v = eval_val(&params, &mut ws);
        if epoch == 1 {
            first_val = v;
        }
        if v < best_val {
            best_val = v;
            best.copy_from_slice(&params);
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    if !best_val.is_finite() {
        return Err(CdeError::Diverged("validation loss never finite".into()));
    }
    Ok((best, TrainReport { epochs_run, best_epoch, first_val_loss: first_val, best_val_loss: best_val }))
}

/// Mean and standard deviation used to standardize the response, with a
/// unit scale for a constant response.
pub(crate) fn response_scaling(y: &[f64]) -> (f64, f64) {
    let (m, s) = crate::dataset::mean_sd(y, 0.0);
    (m, if s > 0.0 { s } else { 1.0 })
}
