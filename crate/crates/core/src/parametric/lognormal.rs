use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use super::hetero::fit_hetero_design;
use super::linear::{linear_predictor, LinearFit, RidgeConfig};
use super::{positivity_shift, scale_floor};
use crate::dataset::Dataset;
use crate::error::Result;
use crate::grid::{EvalGrid, GridDensity};
use crate::model::{check_dim, ConditionalDensity};
use crate::special::normal_ln_pdf;

#[derive(Debug, Clone, PartialEq)]
pub enum LogScale {
    /// Constant log-scale standard deviation.
    Constant(f64),
    /// Log-variance coefficients, intercept first.
    Hetero(Vec<f64>),
}

/// `log(Y + c) | x ~ N(xᵀβ, σ²(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogNormalFit {
    pub beta: Vec<f64>,
    pub shift_c: f64,
    pub scale: LogScale,
    pub lambda: Option<f64>,
    pub converged: bool,
    pub sd_floor: f64,
}

pub fn fit_lognormal(ds: &Dataset, hetero: bool, ridge: Option<&RidgeConfig>) -> Result<LogNormalFit> {
    let shift_c = positivity_shift(&ds.response);
    let z: Vec<f64> = ds.response.iter().map(|y| (y + shift_c).ln()).collect();
    let lf = LinearFit::fit(&ds.features, &z, ridge)?;
    let sd_floor = scale_floor(&z);
    if !hetero {
        let n = ds.n() as f64;
        let denom = if ridge.is_some() { n } else { n - ds.d() as f64 - 1.0 };
        let sigma = (lf.rss() / denom).sqrt().max(sd_floor);
        return Ok(LogNormalFit {
            beta: lf.raw_coef(),
            shift_c,
            scale: LogScale::Constant(sigma),
            lambda: lf.lambda,
            converged: true,
            sd_floor,
        });
    }
    let h = fit_hetero_design(&lf.design, &z, &lf.coef, lf.lambda.unwrap_or(0.0))?;
    Ok(LogNormalFit {
        beta: lf.design.to_raw(&h.beta),
        shift_c,
        scale: LogScale::Hetero(lf.design.to_raw(&h.gamma)),
        lambda: lf.lambda,
        converged: h.converged,
        sd_floor,
    })
}

impl LogNormalFit {
    pub fn log_sd(&self, x: &[f64]) -> f64 {
        match &self.scale {
            LogScale::Constant(s) => *s,
            LogScale::Hetero(g) => (0.5 * linear_predictor(g, x)).exp().max(self.sd_floor),
        }
    }
}

impl ConditionalDensity for LogNormalFit {
    fn n_features(&self) -> usize {
        self.beta.len() - 1
    }

    fn density(&self, x: &[f64], grid: &EvalGrid) -> Result<GridDensity> {
        check_dim(self.n_features(), x)?;
        let mu = linear_predictor(&self.beta, x);
        let sd = self.log_sd(x);
        GridDensity::from_fn(*grid, |y| {
            let s = y + self.shift_c;
            if s <= 0.0 {
                0.0
            } else {
                (normal_ln_pdf(s.ln(), mu, sd) - s.ln()).exp()
            }
        })
    }
}
