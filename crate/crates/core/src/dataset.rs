//! Encoded covariates plus a univariate response.

use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{CdeError, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub response: Vec<f64>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(features: Matrix, response: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        if features.rows() != response.len() {
            return Err(CdeError::LengthMismatch { expected: features.rows(), got: response.len() });
        }
        if features.cols() == 0 {
            return Err(CdeError::Empty("feature columns"));
        }
        if feature_names.len() != features.cols() {
            return Err(CdeError::LengthMismatch { expected: features.cols(), got: feature_names.len() });
        }
        if features.as_slice().iter().chain(&response).any(|v| !v.is_finite()) {
            return Err(CdeError::NonFinite("dataset"));
        }
        Ok(Dataset { features, response, feature_names })
    }

    /// Dataset with generated feature names `x0, x1, ...`.
    pub fn unnamed(features: Matrix, response: Vec<f64>) -> Result<Self> {
        let names = (0..features.cols()).map(|j| alloc::format!("x{j}")).collect();
        Self::new(features, response, names)
    }

    pub fn n(&self) -> usize {
        self.response.len()
    }

    pub fn d(&self) -> usize {
        self.features.cols()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(idx),
            response: idx.iter().map(|&i| self.response[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Column-wise affine map to zero mean and unit variance, fitted on training
/// rows. Constant columns are centered but left unscaled.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    /// Columns whose training variance is zero.
    pub constant: Vec<bool>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let (n, d) = (x.rows() as f64, x.cols());
        let mut means = alloc::vec![0.0; d];
        for r in x.iter_rows() {
            for (m, v) in means.iter_mut().zip(r) {
                *m += v;
            }
        }
        for m in means.iter_mut() {
            *m /= n;
        }
        let mut var = alloc::vec![0.0; d];
        for r in x.iter_rows() {
            for j in 0..d {
                var[j] += (r[j] - means[j]).powi(2);
            }
        }
        let mut scales = Vec::with_capacity(d);
        let mut constant = Vec::with_capacity(d);
        for (j, v) in var.iter().enumerate() {
            let sd = (v / n).sqrt();
            let is_const = !(sd > 1e-12 * (1.0 + means[j].abs()));
            constant.push(is_const);
            scales.push(if is_const { 1.0 } else { sd });
        }
        Standardizer { means, scales, constant }
    }

    pub fn transform_row(&self, row: &[f64], out: &mut [f64]) {
        for j in 0..row.len() {
            out[j] = if self.constant[j] { 0.0 } else { (row[j] - self.means[j]) / self.scales[j] };
        }
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for i in 0..x.rows() {
            self.transform_row(x.row(i), out.row_mut(i));
        }
        out
    }

    /// Maps coefficients `(intercept, slopes)` of the standardized design back
    /// to the raw design.
    pub fn unscale_coefficients(&self, std_coef: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; std_coef.len()];
        out[0] = std_coef[0];
        for j in 0..self.means.len() {
            if self.constant[j] {
                continue;
            }
            let b = std_coef[j + 1] / self.scales[j];
            out[j + 1] = b;
            out[0] -= b * self.means[j];
        }
        out
    }
}

/// Scalar mean and standard deviation (population), with the standard
/// deviation floored at `floor`.
pub fn mean_sd(v: &[f64], floor: f64) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt().max(floor))
}

pub fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}
