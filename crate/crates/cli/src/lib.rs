//! Experiment harness: configs, the reproduction commands, and their CSV
//! and manifest outputs.

// NaN must fail range checks, so `!(x > 0.0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

pub use commands::{execute, Cli, Cmd, Report};
pub use config::{ExperimentConfig, LoadedConfig};
pub use error::{CliError, CliResult};
