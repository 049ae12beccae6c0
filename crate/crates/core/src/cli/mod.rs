//! Configuration, orchestration and report output for the command-line tool.

pub mod config;
pub mod fit;
pub mod run;

pub use config::{parse_config, ConfigErrors, ExperimentConfig, Subcommand};
pub use fit::{fit_decay, DecayFit};
pub use run::{run_experiment, RunError, RunSummary};
