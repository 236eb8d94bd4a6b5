//! Experiment harness around `rfkr-core`: configuration files, seeded
//! parallel grids, CSV and JSON outputs, and the `rfkr` command line.

pub mod cache;
pub mod cli;
pub mod config;
pub mod error;
pub mod harness;

pub use config::{ExperimentConfig, LambdaPolicy, Settings};
pub use error::{HarnessError, Result};
pub use harness::{run_cell, run_grid, ExperimentContext, GridOutcome, ResultRow, CSV_COLUMNS};
