use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use cdebench::config::Config;
use cdebench::csv_ingest::{count_rows, load_csv_target};
use cdebench::interchange::read_predictions;
use cdebench::report::{comparisons_csv, compare_foundations, metric_table, stars_csv};
use cdebench::runner::{grid_from_records, run_benchmark, score_prediction_file};
use cdebench::splits::{make_splits, write_splits};
use cdebench::store::{Metric, ResultsStore};
use cde_core::make_eval_grid;

#[derive(Parser)]
#[command(name = "cdebench", version, about = "Conditional density estimation benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every job in a config and write the store and reports.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Score an interchange prediction file against held-out outcomes.
    Score {
        #[arg(long)]
        pred: PathBuf,
        /// CSV holding the test rows, in prediction order.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        target: String,
        /// CSV of the training rows; its target range sets the grid.
        #[arg(long)]
        train: Option<PathBuf>,
    },
    /// Write split index files for an external exporter.
    Splits {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Name recorded in the split files; defaults to the file stem.
        #[arg(long)]
        name: Option<String>,
    },
    /// Print the heatmap of one metric from a results store.
    Report {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        metric: String,
        /// Print per-column ranks instead of values.
        #[arg(long)]
        ranks: bool,
    },
    /// Welch tests of foundation methods against all other methods.
    Significance {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        foundation: Vec<String>,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        /// Print the star table instead of every comparison.
        #[arg(long)]
        stars: bool,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config } => {
            let cfg = Config::load(&config)?;
            let store = run_benchmark(&cfg)?;
            let failed = store.iter().filter(|r| !r.record.ok()).count();
            eprintln!("{} runs ({failed} failed) written to {}", store.len(), cfg.out.display());
        }
        Command::Score { pred, truth, target, train } => {
            let file = read_predictions(&pred)?;
            let y = load_csv_target(&truth, &target)?;
            let grid = match train {
                Some(t) => make_eval_grid(&load_csv_target(&t, &target)?)?,
                None => grid_from_records(&file.records)?,
            };
            let m = score_prediction_file(&file, &y, &grid)?;
            let out = serde_json::json!({
                "method": file.header.method,
                "dataset": file.header.dataset,
                "n_test": y.len(),
                "cde_loss": m.cde_loss,
                "log_lik": m.log_lik,
                "log_lik_clamped": m.log_lik_clamped,
                "crps": m.crps,
                "pit_ks": m.pit_ks,
                "coverage90": m.coverage90,
                "time": m.total_time_s(),
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Splits { dataset, n, seed, out, name } => {
            let rows = count_rows(&dataset)?;
            let name = name.unwrap_or_else(|| {
                dataset.file_stem().map_or_else(|| dataset.display().to_string(), |s| s.to_string_lossy().into_owned())
            });
            let splits = make_splits(&name, rows, n, seed)?;
            write_splits(&splits, &out)?;
            eprintln!("{} splits written to {}", splits.len(), out.display());
        }
        Command::Report { store, metric, ranks } => {
            let s = ResultsStore::load(&store).with_context(|| format!("loading {}", store.display()))?;
            let table = metric_table(&s, Metric::by_name(&metric)?);
            print!("{}", if ranks { table.ranks_csv() } else { table.heatmap_csv() });
        }
        Command::Significance { store, foundation, alpha, stars } => {
            let s = ResultsStore::load(&store).with_context(|| format!("loading {}", store.display()))?;
            let comps = compare_foundations(&s, &foundation, alpha)?;
            print!("{}", if stars { stars_csv(&s, &foundation, &comps) } else { comparisons_csv(&comps) });
        }
    }
    Ok(())
}
