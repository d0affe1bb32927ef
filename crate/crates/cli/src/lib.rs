//! Library surface of the experiment runner, shared between the `stoflow`
//! binary and the test suites.

pub mod config;
pub mod output;
pub mod runner;

pub use config::{ChainEntrySpec, ExperimentConfig, SimplexSpec, SystemSpec};
pub use output::{csv_bytes, parse_csv, summary_bytes, summary_path, write_outputs};
pub use runner::{estimate_order, experiment_names, run, ResultRow, RunError, RunOutcome, Summary};
