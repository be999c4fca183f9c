//! Experiment configuration, training loop, replications and reports.

pub mod config;
pub mod experiment;
pub mod report;
pub mod train;

pub use config::{apply_overrides, ArchConfig, ExperimentConfig, Scale, StrategyConfig, StrategyKind};
pub use experiment::{run_replications, select_lambda, ExperimentOutput};
pub use report::{write_outputs, ExperimentReport, RuntimeInfo};
pub use train::{relative_rmse, train, Qoi, Standardizer, TrainConfig, TrainOutcome, Validator};
