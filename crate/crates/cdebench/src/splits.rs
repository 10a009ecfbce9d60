//! Repeated 75/25 train/test splits with nested training sets.
//!
//! For rep `r` every row is permuted once with a seed derived from the
//! master seed and `r` alone. A split of size `n` takes the first
//! `round(n / 0.75)` rows of that permutation: the first `n` train, the rest
//! test. Smaller training sets are therefore prefixes of larger ones.

use std::path::Path;

use cde_core::tree::derive_seed;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const TRAIN_FRACTION: f64 = 0.75;

/// Reps at size `n`: 50 for the smallest size, 5 otherwise.
pub fn reps_for(n: usize) -> usize {
    if n == 50 {
        50
    } else {
        5
    }
}

/// Rows a dataset needs to support training size `n`.
pub fn rows_needed(n: usize) -> usize {
    (n as f64 / TRAIN_FRACTION).ceil() as usize
}

fn total_rows(n: usize) -> usize {
    (n as f64 / TRAIN_FRACTION).round() as usize
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub dataset: String,
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn make_split(dataset: &str, n_rows: usize, n: usize, rep: usize, seed: u64) -> Result<Split> {
    if n < 2 {
        return Err(HarnessError::invalid(format!("training size {n} is too small")));
    }
    if n_rows < rows_needed(n) {
        return Err(HarnessError::invalid(format!(
            "dataset {dataset:?} has {n_rows} rows; training size {n} needs {}",
            rows_needed(n)
        )));
    }
    let mut perm: Vec<usize> = (0..n_rows).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, rep as u64)));
    let m = total_rows(n);
    Ok(Split {
        dataset: dataset.to_string(),
        n,
        rep,
        seed,
        train: perm[..n].to_vec(),
        test: perm[n..m].to_vec(),
    })
}

/// All reps for size `n`.
pub fn make_splits(dataset: &str, n_rows: usize, n: usize, seed: u64) -> Result<Vec<Split>> {
    (0..reps_for(n)).map(|r| make_split(dataset, n_rows, n, r, seed)).collect()
}

pub fn split_file_name(n: usize, rep: usize) -> String {
    format!("split_n{n}_rep{rep}.json")
}

/// Writes one JSON file per split into `dir`, creating it if needed.
pub fn write_splits(splits: &[Split], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    for s in splits {
        let path = dir.join(split_file_name(s.n, s.rep));
        let mut text = serde_json::to_string(s).expect("split serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
    }
    Ok(())
}

pub fn read_split(path: &Path) -> Result<Split> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Parse { path: path.to_path_buf(), line: e.line(), msg: e.to_string() })
}
