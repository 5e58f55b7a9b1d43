//! Declarative runner: parse an experiment file, run it, write a CSV table,
//! a JSON summary and a separate timing record.

pub mod config;
pub mod error;
pub mod run;

pub use config::{parse_config, parse_config_with, serialize_config, Defaults, ExperimentConfig, ExperimentKind};
pub use error::CliError;
pub use run::{execute, run_experiment, write_outputs, RunOutput, Status};
