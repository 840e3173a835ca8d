//! Experiment orchestration for the `pairs` command-line tool: TOML
//! configuration, replicate runs of the particle filter and the Pairs
//! algorithm, equal-cost calibration, oracle checks on finite models, and
//! CSV reports.

pub mod calibrate;
pub mod config;
pub mod error;
pub mod experiment;
pub mod oracle_check;
pub mod report;

pub use calibrate::{calibrate_equal_cost, equal_cost_m_tilde, Calibration};
pub use config::{BenchmarkConfig, ExperimentConfig, ModelConfig, StrategyKind};
pub use error::CliError;
pub use experiment::{run_calibrated, run_experiment};
pub use oracle_check::{oracle_check, CheckReport};
pub use report::{Row, RunReport};
