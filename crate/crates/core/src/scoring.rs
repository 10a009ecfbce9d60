//! Proper scoring rules and calibration diagnostics for gridded predictive
//! distributions.

use alloc::boxed::Box;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::encoding::{Prediction, PredictionRecord};
use crate::error::{CdeError, Result};
use crate::grid::{CdfCurve, EvalGrid, GridDensity};

/// Floor applied to densities before taking logs.
pub const LOG_DENSITY_FLOOR: f64 = 1e-20;

/// Central predictive interval used for coverage.
pub const COVERAGE_LEVELS: (f64, f64) = (0.05, 0.95);

/// All metrics for one (method, split).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricBundle {
    pub cde_loss: f64,
    pub log_lik: f64,
    /// Fraction of test points whose density hit [`LOG_DENSITY_FLOOR`].
    pub log_lik_clamped: f64,
    pub crps: f64,
    pub pit_ks: f64,
    pub coverage90: f64,
    pub fit_time_s: f64,
    pub predict_time_s: f64,
}

impl MetricBundle {
    pub fn total_time_s(&self) -> f64 {
        self.fit_time_s + self.predict_time_s
    }
}

/// Probability integral transform values, one per test point.
#[derive(Debug, Clone, PartialEq)]
pub struct PitSample {
    values: Vec<f64>,
}

impl PitSample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|u| !(0.0..=1.0).contains(u)) {
            return Err(CdeError::invariant("PIT values must lie in [0, 1]"));
        }
        Ok(PitSample { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_lengths(m: usize, y: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(CdeError::Empty("test set"));
    }
    if m != y.len() {
        return Err(CdeError::LengthMismatch { expected: y.len(), got: m });
    }
    Ok(())
}

/// Empirical CDE loss `mean ∫ f̂(y|xᵢ)² dy − 2 mean f̂(yᵢ|xᵢ)`.
pub fn cde_loss(densities: &[GridDensity], y: &[f64]) -> Result<f64> {
    check_lengths(densities.len(), y)?;
    let m = y.len() as f64;
    let (sq, at): (f64, f64) = densities
        .iter()
        .zip(y)
        .fold((0.0, 0.0), |(s, a), (d, &yi)| (s + d.integral_of_square(), a + d.value_at(yi)));
    Ok(sq / m - 2.0 * at / m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikelihood {
    pub mean: f64,
    pub clamped_fraction: f64,
}

/// Mean log predictive density at the outcomes, floored at
/// [`LOG_DENSITY_FLOOR`].
pub fn log_likelihood(densities: &[GridDensity], y: &[f64]) -> Result<LogLikelihood> {
    check_lengths(densities.len(), y)?;
    let mut total = 0.0;
    let mut clamped = 0usize;
    for (d, &yi) in densities.iter().zip(y) {
        let (ll, c) = clamped_log_density(d.value_at(yi));
        total += ll;
        clamped += c as usize;
    }
    let m = y.len() as f64;
    Ok(LogLikelihood { mean: total / m, clamped_fraction: clamped as f64 / m })
}

fn clamped_log_density(f: f64) -> (f64, bool) {
    if f < LOG_DENSITY_FLOOR {
        (LOG_DENSITY_FLOOR.ln(), true)
    } else {
        (f.ln(), false)
    }
}

/// CRPS of one record against outcome `y`, integrated over `grid`.
pub fn crps(record: &PredictionRecord, y: f64, grid: &EvalGrid) -> Result<f64> {
    if !y.is_finite() {
        return Err(CdeError::NonFinite("outcome"));
    }
    Ok(record.to_cdf(grid)?.crps(y))
}

/// `uᵢ = F̂(yᵢ | xᵢ)`, clamped to [0, 1].
pub fn pit_values(cdfs: &[CdfCurve], y: &[f64]) -> Result<PitSample> {
    check_lengths(cdfs.len(), y)?;
    PitSample::new(cdfs.iter().zip(y).map(|(c, &yi)| c.at(yi)).collect())
}

/// One-sample Kolmogorov–Smirnov distance between the PIT sample and
/// Uniform(0, 1).
pub fn ks_uniform(pit: &PitSample) -> Result<f64> {
    if pit.is_empty() {
        return Err(CdeError::Empty("PIT sample"));
    }
    let mut u = pit.values.clone();
    u.sort_by(f64::total_cmp);
    let m = u.len() as f64;
    Ok(u.iter().enumerate().fold(0.0, |d, (i, &ui)| {
        let above = (i + 1) as f64 / m - ui;
        let below = ui - i as f64 / m;
        d.max(above).max(below)
    }))
}

/// Fraction of outcomes inside the central 90% predictive interval.
pub fn coverage90(cdfs: &[CdfCurve], y: &[f64]) -> Result<f64> {
    check_lengths(cdfs.len(), y)?;
    let mut hits = 0usize;
    for (c, &yi) in cdfs.iter().zip(y) {
        hits += covers(c, yi)? as usize;
    }
    Ok(hits as f64 / y.len() as f64)
}

fn covers(c: &CdfCurve, y: f64) -> Result<bool> {
    let lo = c.quantile(COVERAGE_LEVELS.0)?;
    let hi = c.quantile(COVERAGE_LEVELS.1)?;
    Ok(lo <= y && y <= hi)
}

/// Scores a full set of records against the test outcomes in one pass.
///
/// Density-based metrics use each record's density on `grid`; CDF-based
/// metrics (CRPS, PIT, coverage) use the record's CDF, which for quantile
/// records comes directly from the quantile function.
pub fn score_records(
    records: &[PredictionRecord],
    y: &[f64],
    grid: &EvalGrid,
    fit_time_s: f64,
    predict_time_s: f64,
) -> Result<MetricBundle> {
    check_lengths(records.len(), y)?;
    let m = y.len() as f64;
    let mut sq = 0.0;
    let mut at = 0.0;
    let mut ll = 0.0;
    let mut clamped = 0usize;
    let mut crps_sum = 0.0;
    let mut hits = 0usize;
    let mut pit = Vec::with_capacity(y.len());
    for (i, (rec, &yi)) in records.iter().zip(y).enumerate() {
        let wrap = |e: CdeError| CdeError::Record { index: i, source: Box::new(e) };
        if !yi.is_finite() {
            return Err(wrap(CdeError::NonFinite("outcome")));
        }
        let density = rec.to_density(grid).map_err(wrap)?;
        let f = density.value_at(yi);
        sq += density.integral_of_square();
        at += f;
        let (l, c) = clamped_log_density(f);
        ll += l;
        clamped += c as usize;
        let cdf = match &rec.payload {
            Prediction::Quantiles(q) => q.cdf_on(grid),
            _ => density.to_cdf().map_err(wrap)?,
        };
        crps_sum += cdf.crps(yi);
        pit.push(cdf.at(yi));
        hits += covers(&cdf, yi).map_err(wrap)? as usize;
    }
    let pit = PitSample::new(pit)?;
    Ok(MetricBundle {
        cde_loss: sq / m - 2.0 * at / m,
        log_lik: ll / m,
        log_lik_clamped: clamped as f64 / m,
        crps: crps_sum / m,
        pit_ks: ks_uniform(&pit)?,
        coverage90: hits as f64 / m,
        fit_time_s,
        predict_time_s,
    })
}

/// Convenience wrapper for estimators that already produce grid densities.
pub fn score_densities(densities: Vec<GridDensity>, y: &[f64], fit_time_s: f64, predict_time_s: f64) -> Result<MetricBundle> {
    let grid = match densities.first() {
        Some(d) => *d.grid(),
        None => return Err(CdeError::Empty("test set")),
    };
    let records: Vec<PredictionRecord> = densities.into_iter().map(PredictionRecord::grid).collect();
    score_records(&records, y, &grid, fit_time_s, predict_time_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GRID_SIZE;
    use alloc::vec;

    fn uniform(lo: f64, hi: f64) -> GridDensity {
        let g = EvalGrid::new(lo, hi).unwrap();
        GridDensity::normalized(g, vec![1.0; GRID_SIZE]).unwrap()
    }

    #[test]
    fn cde_loss_uniform_unit() {
        let d = vec![uniform(0.0, 1.0); 3];
        let loss = cde_loss(&d, &[0.1, 0.5, 0.9]).unwrap();
        assert!((loss + 1.0).abs() < 1e-12);
    }

    #[test]
    fn cde_loss_two_points_hand_value() {
        let d = vec![uniform(0.0, 2.0); 2];
        let loss = cde_loss(&d, &[0.5, 1.0]).unwrap();
        assert!((loss + 0.5).abs() < 1e-12);
    }

    #[test]
    fn cde_loss_errors() {
        assert!(matches!(cde_loss(&[], &[]), Err(CdeError::Empty(_))));
        assert!(matches!(cde_loss(&[uniform(0.0, 1.0)], &[0.1, 0.2]), Err(CdeError::LengthMismatch { .. })));
    }

    #[test]
    fn log_likelihood_values() {
        let ll = log_likelihood(&[uniform(0.0, 1.0), uniform(0.0, 1.0)], &[0.2, 0.7]).unwrap();
        assert!(ll.mean.abs() < 1e-12);
        let ll = log_likelihood(&[uniform(0.0, 2.0)], &[1.3]).unwrap();
        assert!((ll.mean - 0.5f64.ln()).abs() < 1e-12);
        let ll = log_likelihood(&[uniform(0.0, 1.0), uniform(0.0, 1.0)], &[0.5, 3.0]).unwrap();
        assert_eq!(ll.clamped_fraction, 0.5);
        assert!((ll.mean - 0.5 * LOG_DENSITY_FLOOR.ln()).abs() < 1e-12);
    }

    #[test]
    fn pit_clamps_outside_grid() {
        let c = uniform(0.0, 1.0).to_cdf().unwrap();
        let p = pit_values(&[c.clone(), c.clone(), c], &[-1.0, 2.0, 0.3]).unwrap();
        assert_eq!(p.values()[0], 0.0);
        assert_eq!(p.values()[1], 1.0);
        assert!((p.values()[2] - 0.3).abs() < 1e-3);
    }

    #[test]
    fn ks_examples() {
        let p = PitSample::new(vec![0.05, 0.25, 0.45, 0.65, 0.85]).unwrap();
        assert!((ks_uniform(&p).unwrap() - 0.15).abs() < 1e-12);
        let p = PitSample::new(vec![0.5]).unwrap();
        assert_eq!(ks_uniform(&p).unwrap(), 0.5);
        let m = 40;
        let p = PitSample::new((1..=m).map(|i| (i as f64 - 0.5) / m as f64).collect()).unwrap();
        assert!((ks_uniform(&p).unwrap() - 0.5 / m as f64).abs() < 1e-12);
        assert!(ks_uniform(&PitSample::new(vec![]).unwrap()).is_err());
        assert!(PitSample::new(vec![1.2]).is_err());
    }

    #[test]
    fn coverage_point_mass_far_away() {
        let g = EvalGrid::new(0.0, 1.0).unwrap();
        let mut v = vec![0.0; GRID_SIZE];
        v[10] = 1.0;
        let d = GridDensity::normalized(g, v).unwrap();
        let c = d.to_cdf().unwrap();
        assert_eq!(coverage90(&[c.clone(), c], &[0.8, 0.9]).unwrap(), 0.0);
    }
}
