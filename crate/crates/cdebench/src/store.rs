//! Results store: one record per (dataset, method, n, rep).
//!
//! Persisted as two JSON Lines files sorted by key. `runs.jsonl` holds
//! everything that is a function of the inputs and seed; wall-clock timings
//! go to `timings.jsonl` so the former reproduces byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use cde_core::MetricBundle;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::tuning::Hyper;

pub const RUNS_FILE: &str = "runs.jsonl";
pub const TIMINGS_FILE: &str = "timings.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RunKey {
    pub dataset: String,
    pub method: String,
    pub n: usize,
    pub rep: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub cde_loss: f64,
    pub log_lik: f64,
    pub log_lik_clamped: f64,
    pub crps: f64,
    pub pit_ks: f64,
    pub coverage90: f64,
}

impl From<&MetricBundle> for Scores {
    fn from(m: &MetricBundle) -> Self {
        Scores {
            cde_loss: m.cde_loss,
            log_lik: m.log_lik,
            log_lik_clamped: m.log_lik_clamped,
            crps: m.crps,
            pit_ks: m.pit_ks,
            coverage90: m.coverage90,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    #[serde(flatten)]
    pub key: RunKey,
    pub seed: u64,
    /// `None` when the job failed.
    pub scores: Option<Scores>,
    pub error: Option<String>,
    pub hyperparameters: Hyper,
}

impl RunRecord {
    pub fn ok(&self) -> bool {
        self.scores.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub fit_time_s: f64,
    pub predict_time_s: f64,
}

#[derive(Serialize, Deserialize)]
struct TimingLine {
    #[serde(flatten)]
    key: RunKey,
    #[serde(flatten)]
    timing: Timing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Metric {
    CdeLoss,
    LogLik,
    Crps,
    PitKs,
    Coverage90,
    Time,
}

impl Metric {
    pub const ALL: [Metric; 6] = [Metric::CdeLoss, Metric::LogLik, Metric::Crps, Metric::PitKs, Metric::Coverage90, Metric::Time];

    pub fn name(self) -> &'static str {
        match self {
            Metric::CdeLoss => "cde_loss",
            Metric::LogLik => "log_lik",
            Metric::Crps => "crps",
            Metric::PitKs => "pit_ks",
            Metric::Coverage90 => "coverage90",
            Metric::Time => "time",
        }
    }

    pub fn by_name(name: &str) -> Result<Metric> {
        Metric::ALL.into_iter().find(|m| m.name() == name).ok_or_else(|| {
            let known: Vec<&str> = Metric::ALL.iter().map(|m| m.name()).collect();
            HarnessError::invalid(format!("unknown metric {name:?}; known: {}", known.join(", ")))
        })
    }

    /// The quantity ranks are computed from, lower is better.
    pub fn rank_value(self, v: f64) -> f64 {
        match self {
            Metric::LogLik => -v,
            Metric::Coverage90 => (v - 0.9).abs(),
            _ => v,
        }
    }

    /// Raw value for a successful run; `Time` needs the timing record.
    pub fn value(self, run: &StoredRun) -> Option<f64> {
        let s = run.record.scores.as_ref()?;
        Some(match self {
            Metric::CdeLoss => s.cde_loss,
            Metric::LogLik => s.log_lik,
            Metric::Crps => s.crps,
            Metric::PitKs => s.pit_ks,
            Metric::Coverage90 => s.coverage90,
            Metric::Time => run.timing.map(|t| t.fit_time_s + t.predict_time_s)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredRun {
    pub record: RunRecord,
    pub timing: Option<Timing>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultsStore {
    runs: BTreeMap<RunKey, StoredRun>,
}

impl ResultsStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, record: RunRecord, timing: Option<Timing>) -> Result<()> {
        let key = record.key.clone();
        if self.runs.contains_key(&key) {
            return Err(HarnessError::invalid(format!(
                "duplicate run {} / {} / n={} / rep={}",
                key.dataset, key.method, key.n, key.rep
            )));
        }
        self.runs.insert(key, StoredRun { record, timing });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn get(&self, key: &RunKey) -> Option<&StoredRun> {
        self.runs.get(key)
    }

    /// Runs in key order.
    pub fn iter(&self) -> impl Iterator<Item = &StoredRun> {
        self.runs.values()
    }

    pub fn render_runs(&self) -> String {
        let mut out = String::new();
        for r in self.runs.values() {
            writeln!(out, "{}", serde_json::to_string(&r.record).expect("record serializes")).unwrap();
        }
        out
    }

    pub fn render_timings(&self) -> String {
        let mut out = String::new();
        for r in self.runs.values() {
            if let Some(timing) = r.timing {
                let line = TimingLine { key: r.record.key.clone(), timing };
                writeln!(out, "{}", serde_json::to_string(&line).expect("timing serializes")).unwrap();
            }
        }
        out
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        for (name, text) in [(RUNS_FILE, self.render_runs()), (TIMINGS_FILE, self.render_timings())] {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
        }
        Ok(())
    }

    /// Reads `runs.jsonl` and, if present, `timings.jsonl` from `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        let mut store = ResultsStore::new();
        for (i, line) in read_lines(&dir.join(RUNS_FILE))? {
            let record: RunRecord = serde_json::from_str(&line).map_err(|e| parse_err(dir, RUNS_FILE, i, e))?;
            store.insert(record, None).map_err(|e| HarnessError::Parse {
                path: dir.join(RUNS_FILE),
                line: i,
                msg: e.to_string(),
            })?;
        }
        let timings = dir.join(TIMINGS_FILE);
        if timings.exists() {
            for (i, line) in read_lines(&timings)? {
                let t: TimingLine = serde_json::from_str(&line).map_err(|e| parse_err(dir, TIMINGS_FILE, i, e))?;
                let run = store.runs.get_mut(&t.key).ok_or_else(|| HarnessError::Parse {
                    path: timings.clone(),
                    line: i,
                    msg: "timing for a run not in runs.jsonl".into(),
                })?;
                run.timing = Some(t.timing);
            }
        }
        Ok(store)
    }
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).map(|(i, l)| (i + 1, l.to_string())).collect())
}

fn parse_err(dir: &Path, file: &str, line: usize, e: serde_json::Error) -> HarnessError {
    HarnessError::Parse { path: dir.join(file), line, msg: e.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(method: &str, rep: usize, ok: bool) -> RunRecord {
        RunRecord {
            key: RunKey { dataset: "d".into(), method: method.into(), n: 50, rep },
            seed: 7 + rep as u64,
            scores: ok.then_some(Scores {
                cde_loss: -0.1 * (rep as f64 + 1.0) / 3.0,
                log_lik: -1.234_567_890_123_456_7,
                log_lik_clamped: 0.0,
                crps: 0.3,
                pit_ks: 0.05,
                coverage90: 0.9,
            }),
            error: (!ok).then(|| "boom".to_string()),
            hyperparameters: Hyper::from([("learning_rate".to_string(), 0.01)]),
        }
    }

    #[test]
    fn reload_reproduces_store() {
        let mut s = ResultsStore::new();
        s.insert(record("B", 1, true), Some(Timing { fit_time_s: 0.1, predict_time_s: 1.0 / 3.0 })).unwrap();
        s.insert(record("A", 0, false), None).unwrap();
        s.insert(record("A", 1, true), Some(Timing { fit_time_s: 2.5, predict_time_s: 0.0 })).unwrap();
        let dir = tempfile::tempdir().unwrap();
        s.save(dir.path()).unwrap();
        let back = ResultsStore::load(dir.path()).unwrap();
        assert_eq!(back, s);
        back.save(dir.path()).unwrap();
        assert_eq!(std::fs::read_to_string(dir.path().join(RUNS_FILE)).unwrap(), s.render_runs());
        let first = s.iter().next().unwrap();
        assert_eq!(first.record.key.method, "A");
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let mut s = ResultsStore::new();
        s.insert(record("A", 0, true), None).unwrap();
        assert!(s.insert(record("A", 0, false), None).is_err());
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn metric_values_and_ranking_transforms() {
        let run = StoredRun { record: record("A", 0, true), timing: Some(Timing { fit_time_s: 1.0, predict_time_s: 0.5 }) };
        assert_eq!(Metric::Time.value(&run), Some(1.5));
        assert_eq!(Metric::Crps.value(&run), Some(0.3));
        let failed = StoredRun { record: record("A", 0, false), timing: None };
        assert_eq!(Metric::CdeLoss.value(&failed), None);
        assert!(Metric::Coverage90.rank_value(0.92) < Metric::Coverage90.rank_value(0.85));
        assert!(Metric::LogLik.rank_value(-1.0) < Metric::LogLik.rank_value(-2.0));
        assert_eq!(Metric::by_name("pit_ks").unwrap(), Metric::PitKs);
        assert!(Metric::by_name("rmse").is_err());
    }
}
