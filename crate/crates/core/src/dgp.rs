//! Synthetic data-generating processes with known conditional densities.
//!
//! Features are i.i.d. `U(-1, 1)` in every process.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::Dataset;
use crate::error::{CdeError, Result};
use crate::grid::{EvalGrid, GridDensity};
use crate::linalg::Matrix;
use crate::model::{check_dim, ConditionalDensity};
use crate::special::{logistic, normal_cdf, normal_pdf, std_normal_cdf};

/// Names accepted by [`SyntheticDgp::by_name`].
pub const SYNTHETIC_NAMES: [&str; 3] = ["hetero-gaussian", "bimodal", "discrete"];

#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticDgp {
    /// `y = xᵀβ + exp(xᵀγ/2) ε`, coefficient vectors intercept first.
    HeteroGaussian { beta: Vec<f64>, gamma: Vec<f64> },
    /// Two Gaussian components whose weight, means and scales move with x.
    Bimodal,
    /// `y = k + 0.05 ε` with `k ∈ {0, …, 6}` a rounded, clipped noisy linear
    /// score of x.
    Discrete,
}

const DISCRETE_MAX: i32 = 6;
const DISCRETE_LATENT_SD: f64 = 0.8;
const DISCRETE_JITTER: f64 = 0.05;

impl SyntheticDgp {
    pub fn hetero_gaussian() -> Self {
        SyntheticDgp::HeteroGaussian { beta: alloc::vec![1.0, 0.5, -1.0, 0.8], gamma: alloc::vec![-0.5, 0.6, -0.4, 0.3] }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "hetero-gaussian" => Some(Self::hetero_gaussian()),
            "bimodal" => Some(SyntheticDgp::Bimodal),
            "discrete" => Some(SyntheticDgp::Discrete),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SyntheticDgp::HeteroGaussian { .. } => "hetero-gaussian",
            SyntheticDgp::Bimodal => "bimodal",
            SyntheticDgp::Discrete => "discrete",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SyntheticDgp::HeteroGaussian { beta, .. } => beta.len() - 1,
            SyntheticDgp::Bimodal | SyntheticDgp::Discrete => 2,
        }
    }

    /// `(mean, sd)` of the heteroscedastic Gaussian at `x`.
    pub fn hetero_params(beta: &[f64], gamma: &[f64], x: &[f64]) -> (f64, f64) {
        let lin = |c: &[f64]| c[0] + c[1..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        (lin(beta), libm::exp(0.5 * lin(gamma)))
    }

    /// `(weight of the first component, [(mean, sd); 2])`.
    pub fn bimodal_params(x: &[f64]) -> (f64, [(f64, f64); 2]) {
        let w = logistic(2.0 * x[0]);
        let c1 = (-1.8 + 0.7 * x[1], 0.45 * libm::exp(0.3 * x[0]));
        let c2 = (1.8 + 0.7 * x[0], 0.6 * libm::exp(-0.3 * x[1]));
        (w, [c1, c2])
    }

    pub fn discrete_latent_mean(x: &[f64]) -> f64 {
        3.0 + 1.5 * x[0] - x[1]
    }

    /// `P(k | x)` for `k = 0..=6`.
    pub fn discrete_probs(x: &[f64]) -> [f64; 7] {
        let m = Self::discrete_latent_mean(x);
        let mut p = [0.0; 7];
        for (k, pk) in p.iter_mut().enumerate() {
            let k = k as i32;
            let upper = if k == DISCRETE_MAX { 1.0 } else { normal_cdf(k as f64 + 0.5, m, DISCRETE_LATENT_SD) };
            let lower = if k == 0 { 0.0 } else { normal_cdf(k as f64 - 0.5, m, DISCRETE_LATENT_SD) };
            *pk = upper - lower;
        }
        p
    }

    pub fn sample_y<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> f64 {
        let eps: f64 = StandardNormal.sample(rng);
        match self {
            SyntheticDgp::HeteroGaussian { beta, gamma } => {
                let (m, s) = Self::hetero_params(beta, gamma, x);
                m + s * eps
            }
            SyntheticDgp::Bimodal => {
                let (w, comps) = Self::bimodal_params(x);
                let (m, s) = if rng.random::<f64>() < w { comps[0] } else { comps[1] };
                m + s * eps
            }
            SyntheticDgp::Discrete => {
                let latent: f64 = StandardNormal.sample(rng);
                let k = libm::round(Self::discrete_latent_mean(x) + DISCRETE_LATENT_SD * latent)
                    .clamp(0.0, DISCRETE_MAX as f64);
                k + DISCRETE_JITTER * eps
            }
        }
    }

    pub fn pdf(&self, x: &[f64], y: f64) -> f64 {
        match self {
            SyntheticDgp::HeteroGaussian { beta, gamma } => {
                let (m, s) = Self::hetero_params(beta, gamma, x);
                normal_pdf(y, m, s)
            }
            SyntheticDgp::Bimodal => {
                let (w, [(m1, s1), (m2, s2)]) = Self::bimodal_params(x);
                w * normal_pdf(y, m1, s1) + (1.0 - w) * normal_pdf(y, m2, s2)
            }
            SyntheticDgp::Discrete => Self::discrete_probs(x)
                .iter()
                .enumerate()
                .map(|(k, p)| p * normal_pdf(y, k as f64, DISCRETE_JITTER))
                .sum(),
        }
    }

    pub fn cdf(&self, x: &[f64], y: f64) -> f64 {
        match self {
            SyntheticDgp::HeteroGaussian { beta, gamma } => {
                let (m, s) = Self::hetero_params(beta, gamma, x);
                normal_cdf(y, m, s)
            }
            SyntheticDgp::Bimodal => {
                let (w, [(m1, s1), (m2, s2)]) = Self::bimodal_params(x);
                w * normal_cdf(y, m1, s1) + (1.0 - w) * normal_cdf(y, m2, s2)
            }
            SyntheticDgp::Discrete => Self::discrete_probs(x)
                .iter()
                .enumerate()
                .map(|(k, p)| p * std_normal_cdf((y - k as f64) / DISCRETE_JITTER))
                .sum(),
        }
    }

    /// `n` draws with features `U(-1, 1)^d`; deterministic in `seed`.
    pub fn simulate(&self, n: usize, seed: u64) -> Result<Dataset> {
        if n == 0 {
            return Err(CdeError::Empty("simulated sample"));
        }
        let d = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::with_capacity(n * d);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let start = xs.len();
            for _ in 0..d {
                xs.push(rng.random_range(-1.0..1.0));
            }
            let y = self.sample_y(&xs[start..], &mut rng);
            ys.push(y);
        }
        Dataset::unnamed(Matrix::from_vec(n, d, xs)?, ys)
    }

    pub fn oracle(&self) -> Oracle {
        Oracle { dgp: self.clone() }
    }
}

/// The true conditional density, sampled on the grid and renormalized like
/// any other estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Oracle {
    dgp: SyntheticDgp,
}

impl Oracle {
    pub fn dgp(&self) -> &SyntheticDgp {
        &self.dgp
    }
}

impl ConditionalDensity for Oracle {
    fn n_features(&self) -> usize {
        self.dgp.dim()
    }

    fn density(&self, x: &[f64], grid: &EvalGrid) -> Result<GridDensity> {
        check_dim(self.dgp.dim(), x)?;
        GridDensity::from_fn(*grid, |y| self.dgp.pdf(x, y))
    }
}
