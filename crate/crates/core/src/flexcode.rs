//! FlexCode: orthogonal-series CDE with regressed coefficients.
//!
//! The response is mapped to `z ∈ [0, 1]` by the training min/max and
//! expanded in the cosine basis. Coefficient `i` is a regression of
//! `φᵢ(z)` on the features; the estimate is clamped at zero, optionally
//! sharpened, and renormalized.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{min_max, Dataset};
use crate::error::{CdeError, Result};
use crate::grid::{EvalGrid, GridDensity, GRID_SIZE};
use crate::linalg::Matrix;
use crate::model::{check_dim, ConditionalDensity};
use crate::tree::{derive_seed, fit_forests, ForestParams, GbtData, GbtLoss, GbtModel, GbtParams, RegressionForest};

pub const CV_FOLDS: usize = 5;
pub const MIN_TRAIN: usize = 20;

/// `min(30, max(15, ⌊√n⌋))`.
pub fn max_terms(n: usize) -> usize {
    let root = libm::floor(libm::sqrt(n as f64)) as usize;
    root.clamp(15, 30)
}

/// 16 equally spaced sharpening exponents from 0.5 to 2.
pub fn flexzboost_alpha_grid() -> Vec<f64> {
    (0..16).map(|i| 0.5 + 1.5 * i as f64 / 15.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineBasis {
    n_terms: usize,
    y_min: f64,
    y_max: f64,
}

impl CosineBasis {
    pub fn new(n_terms: usize, y_min: f64, y_max: f64) -> Result<Self> {
        if n_terms == 0 {
            return Err(CdeError::invalid("basis needs at least one term"));
        }
        if !(y_min.is_finite() && y_max.is_finite() && y_max > y_min) {
            return Err(CdeError::invalid("basis range must be finite and non-degenerate"));
        }
        Ok(CosineBasis { n_terms, y_min, y_max })
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub fn range(&self) -> (f64, f64) {
        (self.y_min, self.y_max)
    }

    /// Clipped to `[0, 1]`.
    pub fn to_z(&self, y: f64) -> f64 {
        ((y - self.y_min) / (self.y_max - self.y_min)).clamp(0.0, 1.0)
    }

    /// `dz/dy`.
    pub fn jacobian(&self) -> f64 {
        1.0 / (self.y_max - self.y_min)
    }

    pub fn phi(i: usize, z: f64) -> f64 {
        if i == 0 {
            1.0
        } else {
            core::f64::consts::SQRT_2 * libm::cos(i as f64 * core::f64::consts::PI * z)
        }
    }

    pub fn eval(&self, z: f64, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n_terms) {
            *o = Self::phi(i, z);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlexBackend {
    Forest(ForestParams),
    Gbt(GbtParams),
}

impl FlexBackend {
    pub fn forest() -> Self {
        FlexBackend::Forest(ForestParams::default())
    }

    pub fn boosted() -> Self {
        FlexBackend::Gbt(GbtParams { rounds: 100, max_depth: 4, learning_rate: 0.1, min_leaf: 1 })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoefRegressor {
    Forest(RegressionForest),
    Gbt(GbtModel),
}

impl CoefRegressor {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            CoefRegressor::Forest(f) => f.predict(x),
            CoefRegressor::Gbt(g) => g.predict(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlexcodeFit {
    basis: CosineBasis,
    /// Regressors for coefficients 1..I; coefficient 0 is identically 1.
    regressors: Vec<CoefRegressor>,
    alpha: f64,
    n_features: usize,
    /// Mean CV CDE loss (in z units) for I = 1..=I_max.
    cv_loss_by_terms: Vec<f64>,
    /// Mean CV CDE loss at the chosen I for each candidate α.
    cv_loss_by_alpha: Vec<(f64, f64)>,
}

impl FlexcodeFit {
    pub fn basis(&self) -> &CosineBasis {
        &self.basis
    }

    pub fn n_terms(&self) -> usize {
        self.basis.n_terms
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn cv_loss_by_terms(&self) -> &[f64] {
        &self.cv_loss_by_terms
    }

    pub fn cv_loss_by_alpha(&self) -> &[(f64, f64)] {
        &self.cv_loss_by_alpha
    }

    /// `β̂₀(x), …, β̂_{I−1}(x)`.
    pub fn coefficients(&self, x: &[f64]) -> Vec<f64> {
        let mut b = Vec::with_capacity(self.n_terms());
        b.push(1.0);
        b.extend(self.regressors.iter().map(|r| r.predict(x)));
        b
    }
}

impl ConditionalDensity for FlexcodeFit {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn density(&self, x: &[f64], grid: &EvalGrid) -> Result<GridDensity> {
        flexcode_predict(self, x, grid)
    }
}

/// Unsharpened FlexCode with `I` chosen by 5-fold CV.
pub fn fit_flexcode(ds: &Dataset, backend: FlexBackend, seed: u64) -> Result<FlexcodeFit> {
    fit_flexcode_with(ds, backend, &[1.0], seed)
}

/// Boosted backend with α tuned over [`flexzboost_alpha_grid`].
pub fn fit_flexzboost(ds: &Dataset, seed: u64) -> Result<FlexcodeFit> {
    fit_flexcode_with(ds, FlexBackend::boosted(), &flexzboost_alpha_grid(), seed)
}

/// Chooses `I` by CV with α = 1, then α from `alphas` by CV at that `I`.
/// Ties go to the smaller `I` and to the earlier α.
pub fn fit_flexcode_with(ds: &Dataset, backend: FlexBackend, alphas: &[f64], seed: u64) -> Result<FlexcodeFit> {
    let n = ds.n();
    if n < MIN_TRAIN {
        return Err(CdeError::TooFewObservations { need: MIN_TRAIN, have: n });
    }
    if alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
        return Err(CdeError::invalid("sharpening exponents must be positive and finite"));
    }
    let (y_min, y_max) = min_max(&ds.response);
    let i_max = max_terms(n);
    let basis = CosineBasis::new(i_max, y_min, y_max)?;
    let z: Vec<f64> = ds.response.iter().map(|&y| basis.to_z(y)).collect();

    // out-of-fold coefficient predictions, row-major n × i_max
    let mut oof = vec![0.0; n * i_max];
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xF01D)));
    for fold in 0..CV_FOLDS {
        let held: Vec<usize> = (0..n).filter(|p| p % CV_FOLDS == fold).map(|p| perm[p]).collect();
        let kept: Vec<usize> = (0..n).filter(|p| p % CV_FOLDS != fold).map(|p| perm[p]).collect();
        let x_tr = ds.features.select_rows(&kept);
        let z_tr: Vec<f64> = kept.iter().map(|&i| z[i]).collect();
        let regs = fit_coefficients(&x_tr, &z_tr, i_max, backend, derive_seed(seed, fold as u64 + 1))?;
        for &i in &held {
            let row = ds.features.row(i);
            oof[i * i_max] = 1.0;
            for (k, r) in regs.iter().enumerate() {
                oof[i * i_max + k + 1] = r.predict(row);
            }
        }
    }

    let table = BasisTable::new(i_max);
    let cv_loss_by_terms = table.cv_losses_by_terms(&oof, &z);
    let mut best_terms = 1;
    for (k, &l) in cv_loss_by_terms.iter().enumerate() {
        if l < cv_loss_by_terms[best_terms - 1] {
            best_terms = k + 1;
        }
    }
    let cv_loss_by_alpha: Vec<(f64, f64)> =
        alphas.iter().map(|&a| (a, table.cv_loss(&oof, &z, best_terms, a))).collect();
    let mut alpha = cv_loss_by_alpha[0];
    for &cand in &cv_loss_by_alpha[1..] {
        if cand.1 < alpha.1 {
            alpha = cand;
        }
    }
    if !alpha.1.is_finite() {
        return Err(CdeError::Diverged("every FlexCode candidate projected to zero mass".into()));
    }

    let regressors = fit_coefficients(&ds.features, &z, best_terms, backend, derive_seed(seed, 0))?;
    Ok(FlexcodeFit {
        basis: CosineBasis::new(best_terms, y_min, y_max)?,
        regressors,
        alpha: alpha.0,
        n_features: ds.d(),
        cv_loss_by_terms,
        cv_loss_by_alpha,
    })
}

/// Regressors for `φ₁(z), …, φ_{terms−1}(z)`. The regressor for a given
/// coefficient does not depend on `terms`.
fn fit_coefficients(x: &Matrix, z: &[f64], terms: usize, backend: FlexBackend, seed: u64) -> Result<Vec<CoefRegressor>> {
    let targets: Vec<Vec<f64>> = (1..terms).map(|i| z.iter().map(|&v| CosineBasis::phi(i, v)).collect()).collect();
    let refs: Vec<&[f64]> = targets.iter().map(|t| t.as_slice()).collect();
    if refs.is_empty() {
        return Ok(Vec::new());
    }
    match backend {
        FlexBackend::Forest(p) => Ok(fit_forests(x, &refs, p, seed)?.into_iter().map(CoefRegressor::Forest).collect()),
        FlexBackend::Gbt(p) => {
            let data = GbtData::new(x);
            refs.iter()
                .enumerate()
                .map(|(k, t)| data.fit(t, GbtLoss::Squared, p, derive_seed(seed, k as u64)).map(CoefRegressor::Gbt))
                .collect()
        }
    }
}

/// The cosine basis tabulated on the 200-point unit grid used for CV.
struct BasisTable {
    grid: EvalGrid,
    terms: usize,
    /// terms × GRID_SIZE
    phi: Vec<f64>,
}

impl BasisTable {
    fn new(terms: usize) -> Self {
        let grid = EvalGrid::new(0.0, 1.0).expect("unit grid");
        let mut phi = vec![0.0; terms * GRID_SIZE];
        for i in 0..terms {
            for k in 0..GRID_SIZE {
                phi[i * GRID_SIZE + k] = CosineBasis::phi(i, grid.point(k));
            }
        }
        BasisTable { grid, terms, phi }
    }

    /// Mean CDE loss over rows for every truncation I = 1..=terms, α = 1.
    fn cv_losses_by_terms(&self, coef: &[f64], z: &[f64]) -> Vec<f64> {
        let mut total = vec![0.0; self.terms];
        let mut s = vec![0.0; GRID_SIZE];
        let mut clamped = vec![0.0; GRID_SIZE];
        for (row, &zi) in coef.chunks(self.terms).zip(z) {
            s.iter_mut().for_each(|v| *v = 0.0);
            for (i, t) in total.iter_mut().enumerate() {
                let phi = &self.phi[i * GRID_SIZE..(i + 1) * GRID_SIZE];
                for (sv, p) in s.iter_mut().zip(phi) {
                    *sv += row[i] * p;
                }
                clamped.iter_mut().zip(&s).for_each(|(c, v)| *c = v.max(0.0));
                *t += self.row_loss(&mut clamped, zi);
            }
        }
        total.iter().map(|t| t / z.len() as f64).collect()
    }

    fn cv_loss(&self, coef: &[f64], z: &[f64], terms: usize, alpha: f64) -> f64 {
        let mut vals = vec![0.0; GRID_SIZE];
        let mut total = 0.0;
        for (row, &zi) in coef.chunks(self.terms).zip(z) {
            for (k, v) in vals.iter_mut().enumerate() {
                let s: f64 = (0..terms).map(|i| row[i] * self.phi[i * GRID_SIZE + k]).sum();
                *v = if s > 0.0 { if alpha == 1.0 { s } else { s.powf(alpha) } } else { 0.0 };
            }
            total += self.row_loss(&mut vals, zi);
        }
        total / z.len() as f64
    }

    /// Normalizes `vals` in place and returns `∫f² − 2f(z)`; infinite when
    /// there is no mass.
    fn row_loss(&self, vals: &mut [f64], z: f64) -> f64 {
        let mass = self.grid.trapezoid(vals);
        if !(mass > 0.0 && mass.is_finite()) {
            return f64::INFINITY;
        }
        vals.iter_mut().for_each(|v| *v /= mass);
        let sq: f64 = {
            let inner: f64 = vals[1..GRID_SIZE - 1].iter().map(|v| v * v).sum();
            self.grid.step() * (inner + 0.5 * (vals[0] * vals[0] + vals[GRID_SIZE - 1] * vals[GRID_SIZE - 1]))
        };
        sq - 2.0 * self.grid.interpolate(vals, z).unwrap_or(0.0)
    }
}

/// Evaluates the expansion on `grid` in response units; zero outside the
/// training range.
pub fn flexcode_predict(fit: &FlexcodeFit, x: &[f64], grid: &EvalGrid) -> Result<GridDensity> {
    check_dim(fit.n_features, x)?;
    let b = fit.coefficients(x);
    let (lo, hi) = fit.basis.range();
    let jac = fit.basis.jacobian();
    let raw: Vec<f64> = (0..GRID_SIZE)
        .map(|k| {
            let y = grid.point(k);
            if y < lo || y > hi {
                return 0.0;
            }
            let z = fit.basis.to_z(y);
            let s: f64 = b.iter().enumerate().map(|(i, bi)| bi * CosineBasis::phi(i, z)).sum::<f64>() * jac;
            s.max(0.0)
        })
        .collect();
    let d = GridDensity::normalized(*grid, raw)?;
    d.sharpen(fit.alpha)
}
