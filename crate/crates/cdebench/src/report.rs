//! Per-metric heatmaps, average ranks and significance stars.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::significance::{holm_bonferroni, welch_one_sided, Direction};
use crate::store::{Metric, ResultsStore};

pub const FAILED_CELL: &str = "×";

/// A heatmap column: one dataset at one training size.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Column {
    pub dataset: String,
    pub n: usize,
}

impl Column {
    pub fn label(&self) -> String {
        format!("{}@{}", self.dataset, self.n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    /// At least one rep failed.
    Failed,
    Ok { values: Vec<f64>, mean: f64, se: Option<f64> },
}

impl Cell {
    fn from_values(values: Vec<f64>) -> Cell {
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let se = (values.len() > 1).then(|| {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
            (var / k).sqrt()
        });
        Cell::Ok { values, mean, se }
    }

    pub fn mean(&self) -> Option<f64> {
        match self {
            Cell::Ok { mean, .. } => Some(*mean),
            Cell::Failed => None,
        }
    }

    fn text(&self) -> String {
        match self {
            Cell::Failed => FAILED_CELL.to_string(),
            Cell::Ok { mean, se: Some(se), .. } => format!("{mean} ({se})"),
            Cell::Ok { mean, se: None, .. } => format!("{mean} (NA)"),
        }
    }
}

/// Every (method, column) cell of one metric. Methods absent from a column
/// have no entry.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    pub metric: Metric,
    pub methods: Vec<String>,
    pub columns: Vec<Column>,
    pub cells: BTreeMap<(String, Column), Cell>,
}

pub fn metric_table(store: &ResultsStore, metric: Metric) -> MetricTable {
    let mut raw: BTreeMap<(String, Column), Option<Vec<f64>>> = BTreeMap::new();
    for run in store.iter() {
        let k = &run.record.key;
        let col = Column { dataset: k.dataset.clone(), n: k.n };
        let entry = raw.entry((k.method.clone(), col)).or_insert_with(|| Some(Vec::new()));
        match (entry.as_mut(), metric.value(run)) {
            (Some(vals), Some(v)) => vals.push(v),
            _ => *entry = None,
        }
    }
    let methods: BTreeSet<String> = raw.keys().map(|(m, _)| m.clone()).collect();
    let columns: BTreeSet<Column> = raw.keys().map(|(_, c)| c.clone()).collect();
    let cells = raw
        .into_iter()
        .map(|(k, v)| (k, v.filter(|v| !v.is_empty()).map_or(Cell::Failed, Cell::from_values)))
        .collect();
    MetricTable { metric, methods: methods.into_iter().collect(), columns: columns.into_iter().collect(), cells }
}

/// Ranks of `values` (lower is better), ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

impl MetricTable {
    /// Per-column ranks of the methods whose cell succeeded.
    pub fn ranks(&self) -> BTreeMap<(String, Column), f64> {
        let mut out = BTreeMap::new();
        for col in &self.columns {
            let present: Vec<(&String, f64)> = self
                .methods
                .iter()
                .filter_map(|m| Some((m, self.cells.get(&(m.clone(), col.clone()))?.mean()?)))
                .collect();
            let vals: Vec<f64> = present.iter().map(|(_, v)| self.metric.rank_value(*v)).collect();
            for ((m, _), r) in present.iter().zip(average_ranks(&vals)) {
                out.insert(((*m).clone(), col.clone()), r);
            }
        }
        out
    }

    /// Mean rank of each method over the columns where it was ranked.
    pub fn average_rank(&self) -> BTreeMap<String, f64> {
        let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for ((m, _), r) in self.ranks() {
            let e = sums.entry(m).or_default();
            e.0 += r;
            e.1 += 1;
        }
        sums.into_iter().map(|(m, (s, k))| (m, s / k as f64)).collect()
    }

    fn header(&self) -> Vec<String> {
        std::iter::once("method".to_string()).chain(self.columns.iter().map(Column::label)).collect()
    }

    /// Methods as rows, columns as `dataset@n`, cells `mean (se)`; the last
    /// column holds each method's average rank.
    pub fn heatmap_csv(&self) -> String {
        let avg = self.average_rank();
        let mut header = self.header();
        header.push("average_rank".into());
        let mut rows = vec![header];
        for m in &self.methods {
            let mut row = vec![m.clone()];
            row.extend(self.columns.iter().map(|c| self.cells.get(&(m.clone(), c.clone())).map_or(String::new(), Cell::text)));
            row.push(avg.get(m).map_or(String::new(), f64::to_string));
            rows.push(row);
        }
        to_csv(&rows)
    }

    pub fn ranks_csv(&self) -> String {
        let ranks = self.ranks();
        let avg = self.average_rank();
        let mut header = self.header();
        header.push("average_rank".into());
        let mut rows = vec![header];
        for m in &self.methods {
            let mut row = vec![m.clone()];
            row.extend(self.columns.iter().map(|c| ranks.get(&(m.clone(), c.clone())).map_or(String::new(), f64::to_string)));
            row.push(avg.get(m).map_or(String::new(), f64::to_string));
            rows.push(row);
        }
        to_csv(&rows)
    }
}

fn to_csv(rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv output is utf-8")
}

/// Metrics that enter significance tests.
pub const TESTED_METRICS: [Metric; 5] = [Metric::CdeLoss, Metric::LogLik, Metric::Crps, Metric::PitKs, Metric::Coverage90];

/// The method never counted as a competitor: it is not an estimator.
const EXCLUDED_COMPETITOR: &str = "Oracle";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub foundation: String,
    pub competitor: String,
    pub dataset: String,
    pub n: usize,
    pub metric: &'static str,
    /// `None` when the test is undefined (both standard errors zero).
    pub t: Option<f64>,
    pub df: Option<f64>,
    pub p: Option<f64>,
    pub reject: bool,
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    match Cell::from_values(v.to_vec()) {
        Cell::Ok { mean, se, .. } => (mean, se.unwrap_or(0.0)),
        Cell::Failed => unreachable!(),
    }
}

/// One-sided Welch tests of each foundation method against every other
/// successful non-foundation method, per column and metric, with Holm's
/// correction inside each (foundation, column, metric) family. Values are
/// compared on the ranking scale, so coverage is judged by its distance to
/// 0.9.
pub fn compare_foundations(store: &ResultsStore, foundations: &[String], alpha: f64) -> Result<Vec<Comparison>> {
    let mut out = Vec::new();
    for metric in TESTED_METRICS {
        let table = metric_table(store, metric);
        for f in foundations {
            for col in &table.columns {
                let vals = |m: &String| match table.cells.get(&(m.clone(), col.clone())) {
                    Some(Cell::Ok { values, .. }) if values.len() >= 2 => {
                        Some(values.iter().map(|&v| metric.rank_value(v)).collect::<Vec<f64>>())
                    }
                    _ => None,
                };
                let Some(fv) = vals(f) else { continue };
                let (mf, sf) = mean_se(&fv);
                let mut family = Vec::new();
                for c in table.methods.iter().filter(|m| !foundations.contains(m) && m.as_str() != EXCLUDED_COMPETITOR) {
                    let Some(cv) = vals(c) else { continue };
                    let (mc, sc) = mean_se(&cv);
                    let res = welch_one_sided(mf, sf, fv.len(), mc, sc, cv.len(), Direction::LowerIsBetter).ok();
                    family.push(Comparison {
                        foundation: f.clone(),
                        competitor: c.clone(),
                        dataset: col.dataset.clone(),
                        n: col.n,
                        metric: metric.name(),
                        t: res.map(|r| r.t),
                        df: res.map(|r| r.df),
                        p: res.map(|r| r.p),
                        reject: false,
                    });
                }
                let tested: Vec<usize> = (0..family.len()).filter(|&i| family[i].p.is_some()).collect();
                let ps: Vec<f64> = tested.iter().map(|&i| family[i].p.unwrap()).collect();
                for (&i, r) in tested.iter().zip(holm_bonferroni(&ps, alpha)?) {
                    family[i].reject = r;
                }
                out.extend(family);
            }
        }
    }
    Ok(out)
}

/// `(foundation, metric, column)` keys where the foundation method
/// significantly beats every competitor it was compared with.
pub fn stars(comparisons: &[Comparison]) -> BTreeSet<(String, &'static str, Column)> {
    let mut all: BTreeMap<(String, &'static str, Column), bool> = BTreeMap::new();
    for c in comparisons {
        let key = (c.foundation.clone(), c.metric, Column { dataset: c.dataset.clone(), n: c.n });
        *all.entry(key).or_insert(true) &= c.reject;
    }
    all.into_iter().filter(|(_, v)| *v).map(|(k, _)| k).collect()
}

pub fn comparisons_csv(comparisons: &[Comparison]) -> String {
    let opt = |v: Option<f64>| v.map_or("NA".to_string(), |x| x.to_string());
    let mut rows = vec![["foundation", "competitor", "dataset", "n", "metric", "t", "df", "p", "reject"]
        .map(String::from)
        .to_vec()];
    for c in comparisons {
        rows.push(vec![
            c.foundation.clone(),
            c.competitor.clone(),
            c.dataset.clone(),
            c.n.to_string(),
            c.metric.to_string(),
            opt(c.t),
            opt(c.df),
            opt(c.p),
            c.reject.to_string(),
        ]);
    }
    to_csv(&rows)
}

/// Rows `(foundation, metric)`, one column per `dataset@n`; `*` marks a
/// column where the foundation method beats all competitors.
pub fn stars_csv(store: &ResultsStore, foundations: &[String], comparisons: &[Comparison]) -> String {
    let starred = stars(comparisons);
    let columns = metric_table(store, Metric::CdeLoss).columns;
    let mut header = vec!["foundation".to_string(), "metric".to_string()];
    header.extend(columns.iter().map(Column::label));
    let mut rows = vec![header];
    for f in foundations {
        for metric in TESTED_METRICS {
            let mut row = vec![f.clone(), metric.name().to_string()];
            row.extend(columns.iter().map(|c| {
                if starred.contains(&(f.clone(), metric.name(), c.clone())) { "*" } else { "" }.to_string()
            }));
            rows.push(row);
        }
    }
    to_csv(&rows)
}

/// Average rank of every method under every metric.
pub fn average_ranks_csv(store: &ResultsStore) -> String {
    let tables: Vec<MetricTable> = Metric::ALL.iter().map(|&m| metric_table(store, m)).collect();
    let mut header = vec!["method".to_string()];
    header.extend(Metric::ALL.iter().map(|m| m.name().to_string()));
    let mut rows = vec![header];
    let avgs: Vec<BTreeMap<String, f64>> = tables.iter().map(MetricTable::average_rank).collect();
    for m in &tables[0].methods {
        let mut row = vec![m.clone()];
        row.extend(avgs.iter().map(|a| a.get(m).map_or(String::new(), f64::to_string)));
        rows.push(row);
    }
    to_csv(&rows)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))
}

/// Writes every report into `dir`: `heatmap_<metric>.csv` per metric,
/// `ranks.csv`, `significance.csv` and `stars.csv`.
pub fn emit_reports(store: &ResultsStore, dir: &Path, foundations: &[String], alpha: f64) -> Result<()> {
    if store.is_empty() {
        return Err(HarnessError::invalid("no runs to report"));
    }
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    for metric in Metric::ALL {
        write(dir, &format!("heatmap_{}.csv", metric.name()), &metric_table(store, metric).heatmap_csv())?;
    }
    write(dir, "ranks.csv", &average_ranks_csv(store))?;
    let comparisons = compare_foundations(store, foundations, alpha)?;
    write(dir, "significance.csv", &comparisons_csv(&comparisons))?;
    write(dir, "stars.csv", &stars_csv(store, foundations, &comparisons))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{RunKey, RunRecord, Scores};
    use crate::tuning::Hyper;
    use proptest::prelude::*;

    fn scores(v: f64) -> Scores {
        Scores { cde_loss: v, log_lik: -v, log_lik_clamped: 0.0, crps: v, pit_ks: 0.1, coverage90: 0.9 + v / 100.0 }
    }

    fn add(store: &mut ResultsStore, dataset: &str, method: &str, rep: usize, v: Option<f64>) {
        let rec = RunRecord {
            key: RunKey { dataset: dataset.into(), method: method.into(), n: 50, rep },
            seed: 0,
            scores: v.map(scores),
            error: v.is_none().then(|| "failed".to_string()),
            hyperparameters: Hyper::new(),
        };
        store.insert(rec, None).unwrap();
    }

    #[test]
    fn rank_examples() {
        assert_eq!(average_ranks(&[-1.0, -0.5]), [1.0, 2.0]);
        assert_eq!(average_ranks(&[0.3, 0.3]), [1.5, 1.5]);
        assert_eq!(average_ranks(&[2.0, 1.0, 2.0, 0.0]), [3.5, 2.0, 3.5, 1.0]);
        let cov: Vec<f64> = [0.92, 0.85].iter().map(|&c| Metric::Coverage90.rank_value(c)).collect();
        assert_eq!(average_ranks(&cov), [1.0, 2.0]);
    }

    #[test]
    fn heatmap_layout_and_failed_cells() {
        let mut s = ResultsStore::new();
        for rep in 0..2 {
            add(&mut s, "d1", "A", rep, Some(-1.0 - rep as f64));
            add(&mut s, "d1", "B", rep, Some(-0.5));
            add(&mut s, "d2", "A", rep, Some(0.25));
            add(&mut s, "d2", "B", rep, if rep == 1 { None } else { Some(0.0) });
        }
        let t = metric_table(&s, Metric::CdeLoss);
        let csv = t.heatmap_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "method,d1@50,d2@50,average_rank");
        assert_eq!(lines[1], "A,-1.5 (0.5),0.25 (0),1");
        assert_eq!(lines[2], format!("B,-0.5 (0),{FAILED_CELL},2"));
        assert_eq!(lines.len(), 3);
        let ranks = t.ranks();
        assert_eq!(ranks.len(), 3);
        assert_eq!(t.ranks_csv().lines().nth(2).unwrap(), "B,2,,2");
    }

    #[test]
    fn single_rep_has_no_se() {
        let mut s = ResultsStore::new();
        add(&mut s, "d", "A", 0, Some(1.0));
        assert_eq!(metric_table(&s, Metric::Crps).heatmap_csv().lines().nth(1).unwrap(), "A,1 (NA),1");
    }

    #[test]
    fn stars_need_every_comparison() {
        let mut s = ResultsStore::new();
        let jitter = [0.0, 0.01, -0.01, 0.005, -0.005];
        for (rep, j) in jitter.iter().enumerate() {
            add(&mut s, "d", "F", rep, Some(-1.0 + j));
            add(&mut s, "d", "C1", rep, Some(-0.5 + j));
            add(&mut s, "d", "C2", rep, Some(-0.4 - j));
            add(&mut s, "d", "Oracle", rep, Some(-3.0 + j));
            add(&mut s, "e", "F", rep, Some(-1.0 + j));
            add(&mut s, "e", "C1", rep, Some(-1.0 - j));
        }
        let f = vec!["F".to_string()];
        let comps = compare_foundations(&s, &f, 0.1).unwrap();
        assert!(comps.iter().all(|c| c.competitor != "Oracle"));
        let st = stars(&comps);
        let d = Column { dataset: "d".into(), n: 50 };
        let e = Column { dataset: "e".into(), n: 50 };
        assert!(st.contains(&("F".to_string(), "cde_loss", d.clone())));
        assert!(st.contains(&("F".to_string(), "log_lik", d.clone())));
        assert!(!st.contains(&("F".to_string(), "cde_loss", e)));
        let csv = stars_csv(&s, &f, &comps);
        assert!(csv.lines().any(|l| l == "F,cde_loss,*,"), "{csv}");
    }

    #[test]
    fn zero_variance_pairs_are_not_rejected() {
        let mut s = ResultsStore::new();
        for rep in 0..3 {
            add(&mut s, "d", "F", rep, Some(0.0));
            add(&mut s, "d", "C", rep, Some(1.0));
        }
        let comps = compare_foundations(&s, &["F".to_string()], 0.1).unwrap();
        let c = comps.iter().find(|c| c.metric == "crps").unwrap();
        assert_eq!(c.p, None);
        assert!(!c.reject);
        assert!(comparisons_csv(&comps).contains("NA"));
    }

    #[test]
    fn emit_writes_all_files() {
        let mut s = ResultsStore::new();
        add(&mut s, "d", "A", 0, Some(1.0));
        let dir = tempfile::tempdir().unwrap();
        emit_reports(&s, dir.path(), &[], 0.1).unwrap();
        for m in Metric::ALL {
            assert!(dir.path().join(format!("heatmap_{}.csv", m.name())).exists());
        }
        for f in ["ranks.csv", "stars.csv", "significance.csv"] {
            assert!(dir.path().join(f).exists());
        }
        assert!(emit_reports(&ResultsStore::new(), dir.path(), &[], 0.1).is_err());
    }

    proptest! {
        #[test]
        fn ranks_are_permutation_invariant(vals in proptest::collection::vec((0u8..6).prop_map(|v| v as f64 / 2.0), 2..8), rot in 0usize..8) {
            let mut s = ResultsStore::new();
            let k = rot % vals.len();
            let names: Vec<String> = (0..vals.len()).map(|i| format!("M{i}")).collect();
            for i in 0..vals.len() {
                let j = (i + k) % vals.len();
                add(&mut s, "d", &names[j], 0, Some(vals[j]));
            }
            let ranks = metric_table(&s, Metric::CdeLoss).ranks();
            let direct = average_ranks(&vals);
            for (i, n) in names.iter().enumerate() {
                prop_assert_eq!(ranks[&(n.clone(), Column { dataset: "d".into(), n: 50 })], direct[i]);
            }
            let total: f64 = direct.iter().sum();
            prop_assert!((total - (vals.len() * (vals.len() + 1)) as f64 / 2.0).abs() < 1e-9);
        }
    }
}
