use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use super::{train, BatchLoss, Mlp, TrainConfig, TrainReport, Workspace};
use crate::dataset::{min_max, Dataset, Standardizer};
use crate::encoding::{bar_to_density, BarDistribution};
use crate::error::{CdeError, Result};
use crate::grid::{bin_index, EvalGrid, GridDensity};
use crate::model::{check_dim, ConditionalDensity};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatMlpConfig {
    pub n_bins: usize,
    pub hidden: usize,
    pub train: TrainConfig,
}

impl Default for CatMlpConfig {
    fn default() -> Self {
        CatMlpConfig { n_bins: 50, hidden: 64, train: TrainConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatMlpFit {
    mlp: Mlp,
    params: Vec<f64>,
    edges: Vec<f64>,
    scaler: Standardizer,
    report: TrainReport,
}

fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let mx = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for (o, l) in out.iter_mut().zip(logits) {
        *o = (l - mx).exp();
        s += *o;
    }
    out.iter_mut().for_each(|o| *o /= s);
}

/// Mean softmax cross-entropy of bin `labels` under `outputs`
/// (`rows × bins` logits). Writes `∂loss/∂outputs` into `d_out` when given.
pub fn catmlp_loss(outputs: &[f64], labels: &[usize], bins: usize, mut d_out: Option<&mut [f64]>) -> f64 {
    let rows = labels.len();
    let mut p = vec![0.0; bins];
    let mut total = 0.0;
    for (i, &c) in labels.iter().enumerate() {
        let row = &outputs[i * bins..(i + 1) * bins];
        let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = mx + row.iter().map(|l| (l - mx).exp()).sum::<f64>().ln();
        total += lse - row[c];
        if let Some(d) = d_out.as_deref_mut() {
            softmax_into(row, &mut p);
            let d = &mut d[i * bins..(i + 1) * bins];
            for j in 0..bins {
                d[j] = (p[j] - if j == c { 1.0 } else { 0.0 }) / rows as f64;
            }
        }
    }
    total / rows as f64
}

/// Loss and parameter gradient of a CatMLP on standardized features.
pub fn catmlp_objective(mlp: &Mlp, params: &[f64], x: &[f64], labels: &[usize]) -> (f64, Vec<f64>) {
    let bins = mlp.n_outputs();
    let mut ws = Workspace::default();
    mlp.forward(params, x, labels.len(), &mut ws);
    let mut d_out = vec![0.0; labels.len() * bins];
    let loss = catmlp_loss(ws.output(), labels, bins, Some(&mut d_out));
    let mut grad = vec![0.0; params.len()];
    mlp.backward(params, &mut ws, &d_out, &mut grad);
    (loss, grad)
}

struct CatBatch<'a> {
    labels: &'a [usize],
    bins: usize,
}

impl BatchLoss for CatBatch<'_> {
    fn loss(&self, outputs: &[f64], rows: &[usize], d_out: Option<&mut [f64]>) -> f64 {
        let lb: Vec<usize> = rows.iter().map(|&r| self.labels[r]).collect();
        catmlp_loss(outputs, &lb, self.bins, d_out)
    }
}

/// Equal-width bins over the training range (last bin closed on the right)
/// and a two-hidden-layer softmax classifier over them.
pub fn catmlp_fit(ds: &Dataset, cfg: &CatMlpConfig) -> Result<CatMlpFit> {
    if ds.n() < 20 {
        return Err(CdeError::TooFewObservations { need: 20, have: ds.n() });
    }
    if cfg.n_bins < 2 || cfg.hidden == 0 {
        return Err(CdeError::invalid("CatMLP needs at least two bins and one hidden unit"));
    }
    let (lo, hi) = min_max(&ds.response);
    if !(hi > lo) {
        return Err(CdeError::invalid("CatMLP: all responses fall in one bin"));
    }
    let bins = cfg.n_bins;
    let labels: Vec<usize> = ds.response.iter().map(|&y| bin_index(y, lo, hi, bins)).collect();
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * width).collect();
    edges[bins] = hi;
    let scaler = Standardizer::fit(&ds.features);
    let x = scaler.transform(&ds.features);
    let mlp = Mlp::new(vec![ds.d(), cfg.hidden, cfg.hidden, bins])?;
    let (params, report) = train(&mlp, &x, &CatBatch { labels: &labels, bins }, &cfg.train)?;
    Ok(CatMlpFit { mlp, params, edges, scaler, report })
}

impl CatMlpFit {
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn report(&self) -> &TrainReport {
        &self.report
    }

    pub fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.scaler.means.len(), x)?;
        let mut xs = vec![0.0; x.len()];
        self.scaler.transform_row(x, &mut xs);
        let out = self.mlp.predict(&self.params, &xs);
        let mut p = vec![0.0; out.len()];
        softmax_into(&out, &mut p);
        Ok(p)
    }

    pub fn bars(&self, x: &[f64]) -> Result<BarDistribution> {
        BarDistribution::new(self.edges.clone(), self.probabilities(x)?)
    }
}

pub fn catmlp_density(fit: &CatMlpFit, x: &[f64], grid: &EvalGrid) -> Result<GridDensity> {
    bar_to_density(&fit.bars(x)?, grid)
}

impl ConditionalDensity for CatMlpFit {
    fn n_features(&self) -> usize {
        self.scaler.means.len()
    }

    fn density(&self, x: &[f64], grid: &EvalGrid) -> Result<GridDensity> {
        catmlp_density(self, x, grid)
    }
}
