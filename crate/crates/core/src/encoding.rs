//! The three encodings a predictive distribution can arrive in, and the
//! conversions that bring each of them onto an [`EvalGrid`].

use alloc::vec::Vec;

use crate::error::{CdeError, Result};
use crate::grid::{CdfCurve, EvalGrid, GridDensity, GRID_SIZE};

const MASS_TOL: f64 = 1e-6;

/// Probability mass over contiguous bins.
#[derive(Debug, Clone, PartialEq)]
pub struct BarDistribution {
    edges: Vec<f64>,
    masses: Vec<f64>,
}

impl BarDistribution {
    pub fn new(edges: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(CdeError::Empty("bar masses"));
        }
        if edges.len() != masses.len() + 1 {
            return Err(CdeError::LengthMismatch { expected: masses.len() + 1, got: edges.len() });
        }
        if edges.iter().chain(&masses).any(|v| !v.is_finite()) {
            return Err(CdeError::NonFinite("bar distribution"));
        }
        if edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CdeError::invariant("bar edges must be strictly increasing"));
        }
        if masses.iter().any(|&m| m < 0.0) {
            return Err(CdeError::invariant("bar masses must be non-negative"));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(CdeError::invariant(alloc::format!("bar masses sum to {total}, not 1")));
        }
        Ok(BarDistribution { edges, masses })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn n_bins(&self) -> usize {
        self.masses.len()
    }

    /// `(center, mass / width)` for every bin.
    pub fn center_densities(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.edges.windows(2).zip(&self.masses).map(|(e, m)| (0.5 * (e[0] + e[1]), m / (e[1] - e[0])))
    }
}

/// Bin densities at bin centers, linearly interpolated onto the grid, zero
/// outside the outermost centers, then normalized.
///
/// A single bin has no neighbour to interpolate towards and is spread
/// uniformly over its own width.
pub fn bar_to_density(bar: &BarDistribution, grid: &EvalGrid) -> Result<GridDensity> {
    if bar.n_bins() == 1 {
        let (a, b) = (bar.edges[0], bar.edges[1]);
        let h = 1.0 / (b - a);
        return GridDensity::from_fn(*grid, |t| if t >= a && t <= b { h } else { 0.0 });
    }
    let (centers, dens): (Vec<f64>, Vec<f64>) = bar.center_densities().unzip();
    let raw = (0..GRID_SIZE).map(|i| piecewise_linear(&centers, &dens, grid.point(i), 0.0, 0.0)).collect();
    GridDensity::normalized(*grid, raw)
}

/// Piecewise-linear interpolation through `(xs, ys)` with constant
/// extrapolation values `below` / `above`. `xs` must be non-decreasing; on
/// ties the right-most knot at or below `t` wins.
fn piecewise_linear(xs: &[f64], ys: &[f64], t: f64, below: f64, above: f64) -> f64 {
    let n = xs.len();
    if t < xs[0] {
        return below;
    }
    if t > xs[n - 1] {
        return above;
    }
    let k = xs.partition_point(|&x| x <= t);
    if k == n {
        return ys[n - 1];
    }
    // xs[k-1] <= t < xs[k]
    let (x0, x1) = (xs[k - 1], xs[k]);
    let w = (t - x0) / (x1 - x0);
    ys[k - 1] + w * (ys[k] - ys[k - 1])
}

/// A predictive quantile function given at a set of levels.
///
/// Values are sorted on construction, which is how crossing quantiles are
/// repaired.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileFunction {
    levels: Vec<f64>,
    values: Vec<f64>,
}

impl QuantileFunction {
    pub fn new(levels: Vec<f64>, mut values: Vec<f64>) -> Result<Self> {
        if levels.len() < 3 {
            return Err(CdeError::invalid("a quantile function needs at least 3 levels"));
        }
        if levels.len() != values.len() {
            return Err(CdeError::LengthMismatch { expected: levels.len(), got: values.len() });
        }
        if levels.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(CdeError::NonFinite("quantile function"));
        }
        if levels.iter().any(|&l| l <= 0.0 || l >= 1.0) {
            return Err(CdeError::invariant("quantile levels must lie in (0, 1)"));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CdeError::invariant("quantile levels must be strictly increasing"));
        }
        values.sort_by(f64::total_cmp);
        Ok(QuantileFunction { levels, values })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The implied CDF on `grid`: linear between `(value, level)` knots, 0
    /// below the smallest value and 1 above the largest.
    pub fn cdf_on(&self, grid: &EvalGrid) -> CdfCurve {
        let values = (0..GRID_SIZE)
            .map(|i| piecewise_linear(&self.values, &self.levels, grid.point(i), 0.0, 1.0))
            .collect();
        CdfCurve::new(*grid, values).expect("piecewise-linear cdf is monotone in [0, 1]")
    }
}

/// Central-difference derivative of the quantile-implied CDF, clamped and
/// normalized.
pub fn quantiles_to_density(q: &QuantileFunction, grid: &EvalGrid) -> Result<GridDensity> {
    let cdf = q.cdf_on(grid);
    let f = cdf.values();
    let h = grid.step();
    let mut raw = Vec::with_capacity(GRID_SIZE);
    raw.push((f[1] - f[0]) / h);
    for i in 1..GRID_SIZE - 1 {
        raw.push((f[i + 1] - f[i - 1]) / (2.0 * h));
    }
    raw.push((f[GRID_SIZE - 1] - f[GRID_SIZE - 2]) / h);
    GridDensity::normalized(*grid, raw)
}

/// The 199 levels 0.005, 0.010, ..., 0.995.
pub fn standard_quantile_levels() -> Vec<f64> {
    (1..=199).map(|i| i as f64 * 0.005).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Grid(GridDensity),
    Bar(BarDistribution),
    Quantiles(QuantileFunction),
}

/// One test point's predictive distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub index: Option<usize>,
    pub payload: Prediction,
}

impl PredictionRecord {
    pub fn grid(d: GridDensity) -> Self {
        PredictionRecord { index: None, payload: Prediction::Grid(d) }
    }

    pub fn bar(b: BarDistribution) -> Self {
        PredictionRecord { index: None, payload: Prediction::Bar(b) }
    }

    pub fn quantiles(q: QuantileFunction) -> Self {
        PredictionRecord { index: None, payload: Prediction::Quantiles(q) }
    }

    pub fn encoding(&self) -> &'static str {
        match self.payload {
            Prediction::Grid(_) => "grid",
            Prediction::Bar(_) => "bar",
            Prediction::Quantiles(_) => "quantiles",
        }
    }

    /// Density on `grid`. Grid-encoded records keep their own grid.
    pub fn to_density(&self, grid: &EvalGrid) -> Result<GridDensity> {
        match &self.payload {
            Prediction::Grid(d) => Ok(d.clone()),
            Prediction::Bar(b) => bar_to_density(b, grid),
            Prediction::Quantiles(q) => quantiles_to_density(q, grid),
        }
    }

    /// CDF on `grid`. Quantile records go straight from the quantile function
    /// without the density detour.
    pub fn to_cdf(&self, grid: &EvalGrid) -> Result<CdfCurve> {
        match &self.payload {
            Prediction::Quantiles(q) => Ok(q.cdf_on(grid)),
            _ => self.to_density(grid)?.to_cdf(),
        }
    }

    /// Support endpoints implied by the payload.
    pub fn support(&self) -> (f64, f64) {
        match &self.payload {
            Prediction::Grid(d) => (d.grid().lo(), d.grid().hi()),
            Prediction::Bar(b) => (b.edges[0], b.edges[b.edges.len() - 1]),
            Prediction::Quantiles(q) => (q.values[0], q.values[q.values.len() - 1]),
        }
    }
}
