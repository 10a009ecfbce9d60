//! Benchmark configuration files.

use std::path::{Path, PathBuf};

use cde_core::dgp::SYNTHETIC_NAMES;
use serde::Deserialize;

use crate::error::{HarnessError, Result};
use crate::methods::Method;

pub const DEFAULT_ALPHA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum DatasetSpec {
    /// A synthetic process name, or a CSV path whose last column is the
    /// response.
    Name(String),
    Csv {
        path: PathBuf,
        target: Option<String>,
        #[serde(default)]
        impute: bool,
        name: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub datasets: Vec<DatasetSpec>,
    pub methods: Vec<String>,
    pub sizes: Vec<usize>,
    pub seed: u64,
    pub out: PathBuf,
    #[serde(default)]
    pub external_predictions: Vec<PathBuf>,
    /// Methods tested against all others for the significance stars.
    #[serde(default)]
    pub foundation: Vec<String>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Worker threads; defaults to the available parallelism.
    pub workers: Option<usize>,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

/// A dataset entry after name resolution.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Synthetic(String),
    Csv { name: String, path: PathBuf, target: Option<String>, impute: bool },
}

impl DatasetSource {
    pub fn name(&self) -> &str {
        match self {
            DatasetSource::Synthetic(n) => n,
            DatasetSource::Csv { name, .. } => name,
        }
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

impl Config {
    /// Parses `path`; relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg: Config = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Parse { path: path.to_path_buf(), line: e.line(), msg: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.out);
        cfg.external_predictions.iter_mut().for_each(resolve);
        for d in &mut cfg.datasets {
            match d {
                DatasetSpec::Csv { path, .. } => resolve(path),
                DatasetSpec::Name(n) if !SYNTHETIC_NAMES.contains(&n.as_str()) => {
                    let mut p = PathBuf::from(&*n);
                    resolve(&mut p);
                    *n = p.to_string_lossy().into_owned();
                }
                DatasetSpec::Name(_) => {}
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() || self.sizes.is_empty() {
            return Err(HarnessError::invalid("config needs at least one dataset and one size"));
        }
        if self.methods.is_empty() && self.external_predictions.is_empty() {
            return Err(HarnessError::invalid("config lists no methods and no external predictions"));
        }
        for m in &self.methods {
            Method::by_name(m)?;
        }
        if self.workers == Some(0) {
            return Err(HarnessError::invalid("workers must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(HarnessError::invalid("alpha must lie in (0, 1)"));
        }
        let names: Vec<String> = self.sources().iter().map(|s| s.name().to_string()).collect();
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(HarnessError::invalid(format!("dataset name {n:?} appears twice")));
            }
        }
        Ok(())
    }

    pub fn sources(&self) -> Vec<DatasetSource> {
        self.datasets
            .iter()
            .map(|d| match d {
                DatasetSpec::Name(n) if SYNTHETIC_NAMES.contains(&n.as_str()) => DatasetSource::Synthetic(n.clone()),
                DatasetSpec::Name(p) => {
                    let path = PathBuf::from(p);
                    DatasetSource::Csv { name: stem(&path), path, target: None, impute: false }
                }
                DatasetSpec::Csv { path, target, impute, name } => DatasetSource::Csv {
                    name: name.clone().unwrap_or_else(|| stem(path)),
                    path: path.clone(),
                    target: target.clone(),
                    impute: *impute,
                },
            })
            .collect()
    }
}
