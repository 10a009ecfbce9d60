use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use super::{response_scaling, train, BatchLoss, Mlp, TrainConfig, TrainReport, Workspace};
use crate::dataset::{Dataset, Standardizer};
use crate::error::{CdeError, Result};
use crate::grid::{EvalGrid, GridDensity, GRID_SIZE};
use crate::model::{check_dim, ConditionalDensity};
use crate::special::normal_pdf;

/// Floor on component log standard deviations, in standardized response
/// units (`σ ≥ 1e-3 · sd(y)`).
pub const LOG_SD_FLOOR: f64 = -6.907_755_278_982_137;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdnConfig {
    pub components: usize,
    pub hidden: usize,
    pub train: TrainConfig,
}

impl Default for MdnConfig {
    fn default() -> Self {
        MdnConfig { components: 3, hidden: 32, train: TrainConfig::default() }
    }
}

/// A Gaussian mixture in response units.
#[derive(Debug, Clone, PartialEq)]
pub struct MdnMixture {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl MdnMixture {
    pub fn pdf(&self, y: f64) -> f64 {
        (0..self.weights.len()).map(|k| self.weights[k] * normal_pdf(y, self.means[k], self.sds[k])).sum()
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.means).map(|(w, m)| w * m).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdnFit {
    mlp: Mlp,
    params: Vec<f64>,
    components: usize,
    scaler: Standardizer,
    y_mean: f64,
    y_sd: f64,
    report: TrainReport,
}

/// Splits one output row into mixture parameters in standardized units:
/// log-weights, means, log standard deviations (floored).
fn unpack(row: &[f64], k: usize, log_w: &mut [f64], log_sd: &mut [f64]) {
    let logits = &row[..k];
    let mx = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = mx + logits.iter().map(|l| (l - mx).exp()).sum::<f64>().ln();
    for j in 0..k {
        log_w[j] = logits[j] - lse;
        log_sd[j] = row[2 * k + j].max(LOG_SD_FLOOR);
    }
}

/// Mean negative log-likelihood of standardized responses `y` under the
/// mixtures encoded by `outputs` (`rows × 3k`: logits, means, raw log
/// sds). Writes `∂loss/∂outputs` into `d_out` when given.
pub fn mdn_loss(outputs: &[f64], y: &[f64], k: usize, mut d_out: Option<&mut [f64]>) -> f64 {
    let rows = y.len();
    let width = 3 * k;
    let mut log_w = vec![0.0; k];
    let mut log_sd = vec![0.0; k];
    let mut comp = vec![0.0; k];
    let mut total = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let row = &outputs[i * width..(i + 1) * width];
        unpack(row, k, &mut log_w, &mut log_sd);
        for j in 0..k {
            let z = (yi - row[k + j]) * (-log_sd[j]).exp();
            comp[j] = log_w[j] - HALF_LN_2PI - log_sd[j] - 0.5 * z * z;
        }
        let mx = comp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = mx + comp.iter().map(|c| (c - mx).exp()).sum::<f64>().ln();
        total -= lse;
        if let Some(d) = d_out.as_deref_mut() {
            let d = &mut d[i * width..(i + 1) * width];
            let scale = 1.0 / rows as f64;
            for j in 0..k {
                let r = (comp[j] - lse).exp();
                let inv_sd = (-log_sd[j]).exp();
                let z = (yi - row[k + j]) * inv_sd;
                d[j] = scale * (log_w[j].exp() - r);
                d[k + j] = -scale * r * z * inv_sd;
                d[2 * k + j] = if row[2 * k + j] > LOG_SD_FLOOR { -scale * r * (z * z - 1.0) } else { 0.0 };
            }
        }
    }
    total / rows as f64
}

/// Loss and parameter gradient of an MDN on standardized data.
pub fn mdn_objective(mlp: &Mlp, params: &[f64], x: &[f64], y: &[f64], k: usize) -> (f64, Vec<f64>) {
    let mut ws = Workspace::default();
    mlp.forward(params, x, y.len(), &mut ws);
    let mut d_out = vec![0.0; y.len() * 3 * k];
    let loss = mdn_loss(ws.output(), y, k, Some(&mut d_out));
    let mut grad = vec![0.0; params.len()];
    mlp.backward(params, &mut ws, &d_out, &mut grad);
    (loss, grad)
}

struct MdnBatch<'a> {
    y: &'a [f64],
    k: usize,
}

impl BatchLoss for MdnBatch<'_> {
    fn loss(&self, outputs: &[f64], rows: &[usize], d_out: Option<&mut [f64]>) -> f64 {
        let yb: Vec<f64> = rows.iter().map(|&r| self.y[r]).collect();
        mdn_loss(outputs, &yb, self.k, d_out)
    }
}

/// One hidden ReLU layer feeding `3K` mixture outputs; features and
/// response are standardized for training.
pub fn mdn_fit(ds: &Dataset, cfg: &MdnConfig) -> Result<MdnFit> {
    if ds.n() < 20 {
        return Err(CdeError::TooFewObservations { need: 20, have: ds.n() });
    }
    if cfg.components == 0 || cfg.hidden == 0 {
        return Err(CdeError::invalid("MDN needs at least one component and one hidden unit"));
    }
    let scaler = Standardizer::fit(&ds.features);
    let x = scaler.transform(&ds.features);
    let (y_mean, y_sd) = response_scaling(&ds.response);
    let y: Vec<f64> = ds.response.iter().map(|v| (v - y_mean) / y_sd).collect();
    let k = cfg.components;
    let mlp = Mlp::new(vec![ds.d(), cfg.hidden, 3 * k])?;
    let (params, report) = train(&mlp, &x, &MdnBatch { y: &y, k }, &cfg.train)?;
    Ok(MdnFit { mlp, params, components: k, scaler, y_mean, y_sd, report })
}

impl MdnFit {
    pub fn components(&self) -> usize {
        self.components
    }

    pub fn report(&self) -> &TrainReport {
        &self.report
    }

    pub fn mixture(&self, x: &[f64]) -> Result<MdnMixture> {
        check_dim(self.scaler.means.len(), x)?;
        let mut xs = vec![0.0; x.len()];
        self.scaler.transform_row(x, &mut xs);
        let out = self.mlp.predict(&self.params, &xs);
        let k = self.components;
        let mut log_w = vec![0.0; k];
        let mut log_sd = vec![0.0; k];
        unpack(&out, k, &mut log_w, &mut log_sd);
        Ok(MdnMixture {
            weights: log_w.iter().map(|l| l.exp()).collect(),
            means: out[k..2 * k].iter().map(|m| self.y_mean + self.y_sd * m).collect(),
            sds: log_sd.iter().map(|l| self.y_sd * l.exp()).collect(),
        })
    }

    /// Mean NLL of `ds` in standardized units, as used for training.
    pub fn standardized_nll(&self, ds: &Dataset) -> Result<f64> {
        let x = self.scaler.transform(&ds.features);
        let y: Vec<f64> = ds.response.iter().map(|v| (v - self.y_mean) / self.y_sd).collect();
        let mut ws = Workspace::default();
        self.mlp.forward(&self.params, x.as_slice(), x.rows(), &mut ws);
        Ok(mdn_loss(ws.output(), &y, self.components, None))
    }
}

pub fn mdn_density(fit: &MdnFit, x: &[f64], grid: &EvalGrid) -> Result<GridDensity> {
    let mix = fit.mixture(x)?;
    let raw = (0..GRID_SIZE).map(|i| mix.pdf(grid.point(i))).collect();
    GridDensity::normalized(*grid, raw)
}

impl ConditionalDensity for MdnFit {
    fn n_features(&self) -> usize {
        self.scaler.means.len()
    }

    fn density(&self, x: &[f64], grid: &EvalGrid) -> Result<GridDensity> {
        mdn_density(self, x, grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::normal_ln_pdf;

    #[test]
    fn single_component_is_gaussian_nll() {
        let out = [0.3, 0.5, -0.2, 1.7, -1.0, 0.1];
        let y = [1.0, -0.5];
        let got = mdn_loss(&out, &y, 1, None);
        let want = -(normal_ln_pdf(1.0, 0.5, (-0.2f64).exp()) + normal_ln_pdf(-0.5, -1.0, (0.1f64).exp())) / 2.0;
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn floor_applies_to_tiny_scales() {
        let out = [0.0, 0.0, -50.0];
        let y = [0.0];
        let want = HALF_LN_2PI + LOG_SD_FLOOR;
        assert!((mdn_loss(&out, &y, 1, None) - want).abs() < 1e-9);
    }
}
