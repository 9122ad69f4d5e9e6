//! File formats, simulation config, experiment harness and CLI support for
//! [`posbias_core`].
//!
//! All files are line-delimited JSON with a one-line header naming the format
//! and its version, except the simulation config (TOML) and experiment
//! results (CSV or a JSON array).

pub mod config;
pub mod formats;
pub mod harness;

pub use config::{load_config, parse_config, ConfigError};
pub use formats::FormatError;
pub use harness::{
    emit_results, mse, run_overlap_experiment, run_sweep_experiment, write_results,
    ExperimentResultRow, HarnessError, ResultFormat,
};
