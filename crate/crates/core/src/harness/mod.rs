//! Experiment driver: configuration, baselines, metrics and output files.

pub mod baseline;
pub mod config;
pub mod metrics;
pub mod run;

pub use baseline::{AverageBaseline, RandomBaseline};
pub use config::{Experiment, ExperimentConfig, Pipeline};
pub use metrics::{cumulative_average_reward, deciles, mean, median, variance, RunTables, Table};
pub use run::{gamma_sweep, replay_checkpoint, run_experiment, RunReport};
