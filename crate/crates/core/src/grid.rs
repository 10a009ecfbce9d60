//! The shared evaluation grid and the two curves that live on it.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{CdeError, Result};

/// Number of points on every evaluation grid.
pub const GRID_SIZE: usize = 200;

/// Fractional margin added on each side of the training range.
const MARGIN: f64 = 0.05;

/// A uniform grid of [`GRID_SIZE`] points from `lo` to `hi` inclusive.
///
/// The grid is fully determined by its endpoints, so it is `Copy` and cheap
/// to share between every density built for the same split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalGrid {
    lo: f64,
    hi: f64,
}

impl EvalGrid {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(CdeError::NonFinite("grid endpoints"));
        }
        if lo >= hi {
            return Err(CdeError::invalid("grid requires lo < hi"));
        }
        Ok(EvalGrid { lo, hi })
    }

    /// Rebuilds a grid from an explicit list of points, checking that they
    /// are uniformly spaced.
    pub fn from_points(points: &[f64]) -> Result<Self> {
        if points.len() != GRID_SIZE {
            return Err(CdeError::LengthMismatch { expected: GRID_SIZE, got: points.len() });
        }
        let grid = EvalGrid::new(points[0], points[GRID_SIZE - 1])?;
        let h = grid.step();
        for (i, &p) in points.iter().enumerate() {
            if !p.is_finite() {
                return Err(CdeError::NonFinite("grid points"));
            }
            let tol = 1e-9 * (h + p.abs());
            if (p - grid.point(i)).abs() > tol {
                return Err(CdeError::invariant("grid points are not uniformly spaced"));
            }
        }
        Ok(grid)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        GRID_SIZE
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (GRID_SIZE - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i == GRID_SIZE - 1 {
            self.hi
        } else {
            self.lo + i as f64 * self.step()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..GRID_SIZE).map(|i| self.point(i)).collect()
    }

    pub fn contains(&self, y: f64) -> bool {
        y >= self.lo && y <= self.hi
    }

    /// Cell index and interpolation weight for `y` inside the grid.
    fn locate(&self, y: f64) -> Option<(usize, f64)> {
        if !self.contains(y) {
            return None;
        }
        let pos = (y - self.lo) / self.step();
        let i = (pos.floor() as usize).min(GRID_SIZE - 2);
        Some((i, (pos - i as f64).clamp(0.0, 1.0)))
    }

    /// Linear interpolation of grid-aligned `values` at `y`; `None` outside.
    pub fn interpolate(&self, values: &[f64], y: f64) -> Option<f64> {
        self.locate(y).map(|(i, w)| values[i] * (1.0 - w) + values[i + 1] * w)
    }

    /// Trapezoid integral of grid-aligned `values`.
    pub fn trapezoid(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), GRID_SIZE);
        let inner: f64 = values[1..GRID_SIZE - 1].iter().sum();
        self.step() * (inner + 0.5 * (values[0] + values[GRID_SIZE - 1]))
    }
}

/// Builds the evaluation grid for a split from its training responses:
/// the observed range widened by 5% on each side.
///
/// When every response is equal the grid instead spans a window of width
/// `max(|y|, 1) * 0.1` centered on that value.
pub fn make_eval_grid(y_train: &[f64]) -> Result<EvalGrid> {
    if y_train.is_empty() {
        return Err(CdeError::Empty("training responses"));
    }
    if y_train.iter().any(|v| !v.is_finite()) {
        return Err(CdeError::NonFinite("training responses"));
    }
    let min = y_train.iter().copied().fold(f64::INFINITY, f64::min);
    let max = y_train.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if range <= 0.0 {
        let half = 0.5 * min.abs().max(1.0) * 0.1;
        return EvalGrid::new(min - half, max + half);
    }
    EvalGrid::new(min - MARGIN * range, max + MARGIN * range)
}

/// A density sampled on an [`EvalGrid`], in 1/response units.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    grid: EvalGrid,
    values: Vec<f64>,
}

impl GridDensity {
    /// Wraps raw values; checks length, finiteness and non-negativity but not
    /// normalization (see [`normalize_density`]).
    pub fn new(grid: EvalGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != GRID_SIZE {
            return Err(CdeError::LengthMismatch { expected: GRID_SIZE, got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CdeError::NonFinite("density values"));
        }
        if values.iter().any(|&v| v < 0.0) {
            return Err(CdeError::invariant("density values must be non-negative"));
        }
        Ok(GridDensity { grid, values })
    }

    /// Clamps `raw` at zero and rescales it to unit trapezoid integral.
    pub fn normalized(grid: EvalGrid, raw: Vec<f64>) -> Result<Self> {
        if raw.len() != GRID_SIZE {
            return Err(CdeError::LengthMismatch { expected: GRID_SIZE, got: raw.len() });
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(CdeError::NonFinite("density values"));
        }
        let mut values = raw;
        for v in values.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let total = grid.trapezoid(&values);
        if !(total > 0.0) || !total.is_finite() {
            return Err(CdeError::ZeroMass);
        }
        for v in values.iter_mut() {
            *v /= total;
        }
        Ok(GridDensity { grid, values })
    }

    /// Evaluates `f` at every grid point and normalizes the result.
    pub fn from_fn(grid: EvalGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let raw = (0..GRID_SIZE).map(|i| f(grid.point(i))).collect();
        Self::normalized(grid, raw)
    }

    pub fn grid(&self) -> &EvalGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Density at `y` by linear interpolation; zero outside the grid.
    pub fn value_at(&self, y: f64) -> f64 {
        self.grid.interpolate(&self.values, y).unwrap_or(0.0)
    }

    pub fn integral(&self) -> f64 {
        self.grid.trapezoid(&self.values)
    }

    /// `∫ f(y)² dy` by the trapezoid rule.
    pub fn integral_of_square(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| v * v).collect();
        self.grid.trapezoid(&sq)
    }

    pub fn mean(&self) -> f64 {
        let yf: Vec<f64> = self.values.iter().enumerate().map(|(i, v)| self.grid.point(i) * v).collect();
        self.grid.trapezoid(&yf) / self.integral()
    }

    /// Raises the density to `alpha` and renormalizes.
    pub fn sharpen(&self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(CdeError::invalid("sharpening exponent must be positive"));
        }
        if alpha == 1.0 {
            return Ok(self.clone());
        }
        let raw = self.values.iter().map(|v| v.powf(alpha)).collect();
        Self::normalized(self.grid, raw)
    }

    pub fn to_cdf(&self) -> Result<CdfCurve> {
        density_to_cdf(self)
    }
}

/// Clamps negative entries to zero and divides by the trapezoid integral.
pub fn normalize_density(gd: &GridDensity) -> Result<GridDensity> {
    GridDensity::normalized(gd.grid, gd.values.clone())
}

/// Cumulative trapezoid integral of a normalized density.
pub fn density_to_cdf(gd: &GridDensity) -> Result<CdfCurve> {
    let total = gd.integral();
    if !(0.999..=1.001).contains(&total) {
        return Err(CdeError::NotNormalized(total));
    }
    let h = gd.grid.step();
    let mut values = Vec::with_capacity(GRID_SIZE);
    let mut acc = 0.0;
    values.push(0.0);
    for w in gd.values.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        values.push(acc);
    }
    for v in values.iter_mut() {
        *v = (*v / total).min(1.0);
    }
    Ok(CdfCurve { grid: gd.grid, values })
}

/// A predictive CDF sampled on an [`EvalGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct CdfCurve {
    grid: EvalGrid,
    values: Vec<f64>,
}

impl CdfCurve {
    pub fn new(grid: EvalGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != GRID_SIZE {
            return Err(CdeError::LengthMismatch { expected: GRID_SIZE, got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CdeError::NonFinite("cdf values"));
        }
        if values[0] < 0.0 || values[GRID_SIZE - 1] > 1.0 + 1e-9 {
            return Err(CdeError::invariant("cdf values must lie in [0, 1]"));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(CdeError::invariant("cdf must be non-decreasing"));
        }
        Ok(CdfCurve { grid, values })
    }

    pub fn grid(&self) -> &EvalGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// CDF at `y`: 0 below the grid, 1 above it, linear in between.
    pub fn at(&self, y: f64) -> f64 {
        if y < self.grid.lo {
            0.0
        } else if y > self.grid.hi {
            1.0
        } else {
            self.grid.interpolate(&self.values, y).unwrap_or(1.0).clamp(0.0, 1.0)
        }
    }

    /// Inverse CDF by linear interpolation between grid points.
    ///
    /// On a flat stretch at exactly `level` the left end of the stretch is
    /// returned.
    pub fn quantile(&self, level: f64) -> Result<f64> {
        if !(level > 0.0 && level < 1.0) {
            return Err(CdeError::invalid("quantile level must lie in (0, 1)"));
        }
        let idx = self.values.partition_point(|&v| v < level);
        if idx == 0 {
            return Ok(self.grid.lo);
        }
        if idx == GRID_SIZE {
            return Ok(self.grid.hi);
        }
        let (f0, f1) = (self.values[idx - 1], self.values[idx]);
        let (t0, t1) = (self.grid.point(idx - 1), self.grid.point(idx));
        Ok(t0 + (level - f0) / (f1 - f0) * (t1 - t0))
    }

    /// CRPS of this forecast for outcome `y`: the trapezoid integral over the
    /// grid of `(F(t) - 1{t >= y})²`, with `y` inserted as an extra node when it
    /// falls strictly inside a cell so the step is integrated exactly.
    pub fn crps(&self, y: f64) -> f64 {
        let h = self.grid.step();
        let sq = |t: f64, f: f64| {
            let step = if t >= y { 1.0 } else { 0.0 };
            (f - step) * (f - step)
        };
        let mut total = 0.0;
        for i in 0..GRID_SIZE - 1 {
            let (t0, t1) = (self.grid.point(i), self.grid.point(i + 1));
            let (f0, f1) = (self.values[i], self.values[i + 1]);
            if y > t0 && y < t1 {
                let w = (y - t0) / (t1 - t0);
                let fy = f0 + w * (f1 - f0);
                total += 0.5 * (y - t0) * (f0 * f0 + fy * fy);
                total += 0.5 * (t1 - y) * ((fy - 1.0).powi(2) + (f1 - 1.0).powi(2));
            } else {
                total += 0.5 * h * (sq(t0, f0) + sq(t1, f1));
            }
        }
        total
    }
}

/// Index of the bin of width `(hi - lo) / bins` containing `y`, with the
/// last bin closed on the right.
pub(crate) fn bin_index(y: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let pos = ((y - lo) / (hi - lo) * bins as f64).floor();
    if pos < 0.0 {
        0
    } else {
        (pos as usize).min(bins - 1)
    }
}
