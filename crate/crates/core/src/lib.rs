//! Conditional density estimation toolkit.
//!
//! Everything in this crate is a pure function of its inputs and builds
//! under `no_std` with `alloc`. IO, file formats and the benchmark CLI live
//! in the `cdebench` companion crate.
//!
//! The universal currency between estimators and metrics is a
//! [`GridDensity`]: a non-negative density sampled on a 200-point uniform
//! [`EvalGrid`] that integrates to one under the trapezoid rule.

#![no_std]

extern crate alloc;

pub mod dataset;
pub mod dgp;
pub mod encoding;
mod error;
pub mod flexcode;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod neural;
pub mod optim;
pub mod parametric;
pub mod quantile_tree;
pub mod scoring;
pub mod special;
pub mod tree;

pub use dataset::Dataset;
pub use encoding::{BarDistribution, PredictionRecord, QuantileFunction};
pub use error::{CdeError, Result};
pub use grid::{make_eval_grid, CdfCurve, EvalGrid, GridDensity, GRID_SIZE};
pub use model::ConditionalDensity;
pub use scoring::{MetricBundle, PitSample};
