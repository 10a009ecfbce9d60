//! Runs every (dataset, size, rep, method) job on a bounded worker pool and
//! scores external prediction files against the same splits.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use cde_core::dgp::SyntheticDgp;
use cde_core::scoring::{score_densities, score_records};
use cde_core::tree::derive_seed;
use cde_core::{make_eval_grid, Dataset, EvalGrid, MetricBundle, PredictionRecord};

use crate::config::{Config, DatasetSource};
use crate::csv_ingest::{last_column, load_csv_dataset};
use crate::error::{HarnessError, Result};
use crate::interchange::{read_predictions, PredictionFile};
use crate::methods::Method;
use crate::report::emit_reports;
use crate::splits::{make_split, reps_for, rows_needed, Split};
use crate::store::{ResultsStore, RunKey, RunRecord, Scores, Timing};
use crate::tuning::Hyper;

/// 64-bit FNV-1a, used to turn names into seed streams.
pub fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub name: String,
    pub data: Dataset,
    pub dgp: Option<SyntheticDgp>,
}

/// Synthetic datasets are simulated once, large enough for the biggest
/// size, from a seed derived from the master seed and the name.
pub fn load_dataset(src: &DatasetSource, sizes: &[usize], seed: u64) -> Result<LoadedDataset> {
    match src {
        DatasetSource::Synthetic(name) => {
            let dgp = SyntheticDgp::by_name(name).ok_or_else(|| HarnessError::invalid(format!("unknown process {name:?}")))?;
            let n = rows_needed(sizes.iter().copied().max().unwrap_or(0)).max(2);
            let data = dgp.simulate(n, derive_seed(seed, fnv1a(name)))?;
            Ok(LoadedDataset { name: name.clone(), data, dgp: Some(dgp) })
        }
        DatasetSource::Csv { name, path, target, impute } => {
            let target = match target {
                Some(t) => t.clone(),
                None => last_column(path)?,
            };
            Ok(LoadedDataset { name: name.clone(), data: load_csv_dataset(path, &target, *impute)?, dgp: None })
        }
    }
}

/// Seed of one job; independent of which other jobs run.
pub fn job_seed(master: u64, dataset: &str, method: &str, n: usize, rep: usize) -> u64 {
    let s = derive_seed(derive_seed(master, fnv1a(dataset)), fnv1a(method));
    derive_seed(derive_seed(s, n as u64), rep as u64)
}

/// The train/test data and grid of one split.
pub struct SplitData {
    pub split: Split,
    pub train: Dataset,
    pub test: Dataset,
    pub grid: EvalGrid,
}

pub fn split_data(ds: &LoadedDataset, n: usize, rep: usize, seed: u64) -> Result<SplitData> {
    let split = make_split(&ds.name, ds.data.n(), n, rep, seed)?;
    let train = ds.data.subset(&split.train);
    let test = ds.data.subset(&split.test);
    let grid = make_eval_grid(&train.response)?;
    Ok(SplitData { split, train, test, grid })
}

struct Outcome {
    bundle: MetricBundle,
    hyper: Hyper,
}

fn fit_and_score(ds: &LoadedDataset, method: Method, n: usize, rep: usize, master: u64, seed: u64) -> Result<Outcome> {
    let sd = split_data(ds, n, rep, master)?;
    let t0 = Instant::now();
    let fitted = method.fit(&sd.train, &sd.grid, seed, ds.dgp.as_ref())?;
    let fit_t = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let densities = fitted.model.densities(&sd.test.features, &sd.grid)?;
    let pred_t = t1.elapsed().as_secs_f64();
    let bundle = score_densities(densities, &sd.test.response, fit_t, pred_t)?;
    Ok(Outcome { bundle, hyper: fitted.hyper })
}

fn panic_text(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into())
}

fn finite(b: &MetricBundle) -> Result<()> {
    let v = [b.cde_loss, b.log_lik, b.crps, b.pit_ks, b.coverage90];
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(HarnessError::invalid("non-finite metric"))
    }
}

fn record_of(key: RunKey, seed: u64, result: Result<Outcome>) -> (RunRecord, Option<Timing>) {
    let result = result.and_then(|o| finite(&o.bundle).map(|_| o));
    match result {
        Ok(o) => (
            RunRecord { key, seed, scores: Some(Scores::from(&o.bundle)), error: None, hyperparameters: o.hyper },
            Some(Timing { fit_time_s: o.bundle.fit_time_s, predict_time_s: o.bundle.predict_time_s }),
        ),
        Err(e) => (RunRecord { key, seed, scores: None, error: Some(e.to_string()), hyperparameters: Hyper::new() }, None),
    }
}

/// Runs one job, turning errors and panics into a failed record.
pub fn run_job(ds: &LoadedDataset, method: Method, n: usize, rep: usize, master: u64) -> (RunRecord, Option<Timing>) {
    let name = method.name();
    let seed = job_seed(master, &ds.name, &name, n, rep);
    let key = RunKey { dataset: ds.name.clone(), method: name, n, rep };
    let result = catch_unwind(AssertUnwindSafe(|| fit_and_score(ds, method, n, rep, master, seed)))
        .unwrap_or_else(|p| Err(HarnessError::invalid(format!("panic: {}", panic_text(p)))));
    record_of(key, seed, result)
}

/// Grid for scoring a prediction file without training data: the shared
/// grid when every record is a grid record on one grid, otherwise the
/// standard grid rule applied to the extremes of the record supports.
pub fn grid_from_records(records: &[PredictionRecord]) -> Result<EvalGrid> {
    use cde_core::encoding::Prediction;
    let first = match records.first().map(|r| &r.payload) {
        Some(Prediction::Grid(d)) => Some(*d.grid()),
        _ => None,
    };
    if let Some(g) = first {
        if records.iter().all(|r| matches!(&r.payload, Prediction::Grid(d) if *d.grid() == g)) {
            return Ok(g);
        }
    }
    let ends: Vec<f64> = records.iter().flat_map(|r| <[f64; 2]>::from(r.support())).collect();
    Ok(make_eval_grid(&ends)?)
}

/// Scores a prediction file against the held-out outcomes, in order.
pub fn score_prediction_file(file: &PredictionFile, y: &[f64], grid: &EvalGrid) -> Result<MetricBundle> {
    if file.records.len() != y.len() {
        return Err(HarnessError::invalid(format!(
            "{} prediction records for {} test rows",
            file.records.len(),
            y.len()
        )));
    }
    Ok(score_records(&file.records, y, grid, file.header.fit_time_s, file.header.predict_time_s)?)
}

/// Header field an exporter sets when its model could not produce output.
pub const EXTERNAL_ERROR_FIELD: &str = "error";

fn score_external(path: &Path, datasets: &[LoadedDataset], master: u64) -> Result<(RunRecord, Option<Timing>)> {
    let file = read_predictions(path)?;
    let h = &file.header;
    let key = RunKey { dataset: h.dataset.clone(), method: h.method.clone(), n: h.n_train, rep: h.rep };
    let result = (|| {
        if let Some(e) = h.extra.get(EXTERNAL_ERROR_FIELD) {
            return Err(HarnessError::invalid(format!("{}: {}", h.method, e.as_str().map_or(e.to_string(), str::to_string))));
        }
        let ds = datasets
            .iter()
            .find(|d| d.name == h.dataset)
            .ok_or_else(|| HarnessError::invalid(format!("{}: dataset {:?} is not in the config", path.display(), h.dataset)))?;
        let sd = split_data(ds, h.n_train, h.rep, master)?;
        let bundle = score_prediction_file(&file, &sd.test.response, &sd.grid)?;
        Ok(Outcome { bundle, hyper: Hyper::new() })
    })();
    Ok(record_of(key, master, result))
}

/// All jobs of a config in a fixed order.
pub fn plan_jobs(cfg: &Config, datasets: &[LoadedDataset]) -> Result<Vec<(usize, Method, usize, usize)>> {
    let methods: Vec<Method> = cfg.methods.iter().map(|m| Method::by_name(m)).collect::<Result<_>>()?;
    let mut jobs = Vec::new();
    for d in 0..datasets.len() {
        for &n in &cfg.sizes {
            for rep in 0..reps_for(n) {
                for &m in &methods {
                    jobs.push((d, m, n, rep));
                }
            }
        }
    }
    Ok(jobs)
}

/// Executes the config, writes the store and reports into `cfg.out`, and
/// returns the store. Job failures become failed records.
pub fn run_benchmark(cfg: &Config) -> Result<ResultsStore> {
    cfg.validate()?;
    let datasets: Vec<LoadedDataset> =
        cfg.sources().iter().map(|s| load_dataset(s, &cfg.sizes, cfg.seed)).collect::<Result<_>>()?;
    let jobs = plan_jobs(cfg, &datasets)?;
    let workers = cfg
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .clamp(1, jobs.len().max(1));
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    let mut store = ResultsStore::new();
    std::thread::scope(|s| -> Result<()> {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, jobs, datasets) = (&next, &jobs, &datasets);
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(d, m, n, rep)) = jobs.get(i) else { break };
                if tx.send(run_job(&datasets[d], m, n, rep, cfg.seed)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (rec, timing) in rx {
            store.insert(rec, timing)?;
        }
        Ok(())
    })?;
    for path in &cfg.external_predictions {
        let (rec, timing) = score_external(path, &datasets, cfg.seed)?;
        store.insert(rec, timing)?;
    }
    store.save(&cfg.out)?;
    emit_reports(&store, &cfg.out, &cfg.foundation, cfg.alpha)?;
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interchange::InterchangeHeader;
    use cde_core::{BarDistribution, GridDensity};

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a("a"), 0xaf63_dc4c_8601_ec8c);
    }

    #[test]
    fn job_seeds_differ_by_every_coordinate() {
        let base = job_seed(1, "d", "m", 50, 0);
        assert_ne!(base, job_seed(2, "d", "m", 50, 0));
        assert_ne!(base, job_seed(1, "e", "m", 50, 0));
        assert_ne!(base, job_seed(1, "d", "n", 50, 0));
        assert_ne!(base, job_seed(1, "d", "m", 500, 0));
        assert_ne!(base, job_seed(1, "d", "m", 50, 1));
    }

    #[test]
    fn failing_job_becomes_a_record() {
        let src = DatasetSource::Synthetic("bimodal".into());
        let ds = load_dataset(&src, &[50], 0).unwrap();
        let (rec, timing) = run_job(&ds, Method::FaultInjection, 50, 0, 0);
        assert!(rec.scores.is_none() && timing.is_none());
        assert!(rec.error.unwrap().contains("deliberate"));
        let (rec, timing) = run_job(&ds, Method::by_name("LinearGauss-Homo").unwrap(), 50, 0, 0);
        assert!(rec.ok() && timing.is_some());
        let (rec, _) = run_job(&ds, Method::by_name("LinearGauss-Homo").unwrap(), 500, 0, 0);
        assert!(rec.error.unwrap().contains("rows"));
    }

    #[test]
    fn grid_rule_for_loose_files() {
        let g = EvalGrid::new(0.0, 1.0).unwrap();
        let d = GridDensity::normalized(g, vec![1.0; 200]).unwrap();
        let same = vec![PredictionRecord::grid(d.clone()), PredictionRecord::grid(d)];
        assert_eq!(grid_from_records(&same).unwrap(), g);
        let bars = vec![
            PredictionRecord::bar(BarDistribution::new(vec![0.0, 1.0], vec![1.0]).unwrap()),
            PredictionRecord::bar(BarDistribution::new(vec![2.0, 4.0], vec![1.0]).unwrap()),
        ];
        assert_eq!(grid_from_records(&bars).unwrap(), make_eval_grid(&[0.0, 4.0]).unwrap());
    }

    #[test]
    fn record_count_must_match() {
        let file = PredictionFile {
            header: InterchangeHeader {
                method: "m".into(),
                dataset: "d".into(),
                rep: 0,
                n_train: 50,
                fit_time_s: 0.0,
                predict_time_s: 0.0,
                extra: Default::default(),
            },
            records: vec![PredictionRecord::bar(BarDistribution::new(vec![0.0, 1.0], vec![1.0]).unwrap())],
        };
        let g = EvalGrid::new(-1.0, 2.0).unwrap();
        assert!(score_prediction_file(&file, &[0.5, 0.5], &g).is_err());
        let m = score_prediction_file(&file, &[0.5], &g).unwrap();
        assert!((m.coverage90 - 1.0).abs() < 1e-12);
    }
}
