//! JSON Lines prediction files: one header object, then one record per test
//! row in test order.

use std::collections::BTreeMap;
use std::path::Path;

use cde_core::encoding::Prediction;
use cde_core::{BarDistribution, CdeError, EvalGrid, GridDensity, PredictionRecord, QuantileFunction};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Tolerance on the trapezoid integral of a grid record.
const GRID_MASS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterchangeHeader {
    pub method: String,
    pub dataset: String,
    pub rep: usize,
    pub n_train: usize,
    pub fit_time_s: f64,
    pub predict_time_s: f64,
    /// Any further provenance fields (package versions and the like),
    /// carried through untouched.
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionFile {
    pub header: InterchangeHeader,
    pub records: Vec<PredictionRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum WireRecord {
    Grid { grid: Vec<f64>, density: Vec<f64> },
    Bar { edges: Vec<f64>, masses: Vec<f64> },
    Quantiles { levels: Vec<f64>, values: Vec<f64> },
}

impl WireRecord {
    fn from_record(rec: &PredictionRecord) -> Self {
        match &rec.payload {
            Prediction::Grid(d) => WireRecord::Grid { grid: d.grid().points(), density: d.values().to_vec() },
            Prediction::Bar(b) => WireRecord::Bar { edges: b.edges().to_vec(), masses: b.masses().to_vec() },
            Prediction::Quantiles(q) => {
                WireRecord::Quantiles { levels: q.levels().to_vec(), values: q.values().to_vec() }
            }
        }
    }

    fn into_record(self) -> Result<PredictionRecord, CdeError> {
        Ok(match self {
            WireRecord::Grid { grid, density } => {
                let d = GridDensity::new(EvalGrid::from_points(&grid)?, density)?;
                let mass = d.integral();
                if (mass - 1.0).abs() > GRID_MASS_TOL {
                    return Err(CdeError::NotNormalized(mass));
                }
                PredictionRecord::grid(d)
            }
            WireRecord::Bar { edges, masses } => PredictionRecord::bar(BarDistribution::new(edges, masses)?),
            WireRecord::Quantiles { levels, values } => {
                PredictionRecord::quantiles(QuantileFunction::new(levels, values)?)
            }
        })
    }
}

/// Parses interchange text; `origin` only labels error messages.
pub fn parse_predictions(text: &str, origin: &Path) -> Result<PredictionFile> {
    let err = |line: usize, msg: String| HarnessError::Parse { path: origin.to_path_buf(), line, msg };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| err(1, "missing header line".into()))?;
    let header: InterchangeHeader = serde_json::from_str(first).map_err(|e| err(1, format!("header: {e}")))?;
    let mut records = Vec::new();
    for (line, text) in lines {
        let wire: WireRecord = serde_json::from_str(text).map_err(|e| err(line, e.to_string()))?;
        let mut rec = wire.into_record().map_err(|e| err(line, e.to_string()))?;
        rec.index = Some(records.len());
        records.push(rec);
    }
    Ok(PredictionFile { header, records })
}

pub fn read_predictions(path: &Path) -> Result<PredictionFile> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_predictions(&text, path)
}

/// Interchange text with a trailing newline. Floats use the shortest
/// representation that parses back to the same value.
pub fn render_predictions(file: &PredictionFile) -> String {
    let mut out = serde_json::to_string(&file.header).expect("header serializes");
    out.push('\n');
    for rec in &file.records {
        out.push_str(&serde_json::to_string(&WireRecord::from_record(rec)).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_predictions(file: &PredictionFile, path: &Path) -> Result<()> {
    std::fs::write(path, render_predictions(file)).map_err(|e| HarnessError::io(path, e))
}
