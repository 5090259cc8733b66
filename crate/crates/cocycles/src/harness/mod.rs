//! Experiment orchestration: architecture registry, metrics, file formats,
//! configuration, and the runner behind the CLI.

pub mod arch;
pub mod config;
pub mod csvio;
pub mod metrics;
pub mod runner;

pub use arch::{architecture, candidates, ConditionerFamily, DEFAULT_HIERARCHY};
pub use config::{ExperimentConfig, Method};
pub use metrics::{ks_distance, ks_distance_1d, rmse};
pub use runner::{run_experiment, write_report, ExperimentReport, TrialRow};
