//! Benchmark harness for the `cde-core` estimators: dataset ingestion,
//! splits, tuning, the run loop, significance tests, reports and the
//! prediction interchange format.

pub mod config;
pub mod csv_ingest;
pub mod error;
pub mod interchange;
pub mod methods;
pub mod report;
pub mod runner;
pub mod significance;
pub mod splits;
pub mod store;
pub mod tuning;

pub use error::{HarnessError, Result};
