//! Benchmark driver: runs configured methods over trials, streams metric rows
//! to CSV and summarises them across trials.

mod aggregate;
mod config;
mod metrics;
mod run;

pub use aggregate::{aggregate, write_aggregate, AggregateRow, Summary};
pub use config::{log_grid, DatasetSpec, ExperimentConfig, MethodSpec, Sampling};
pub use metrics::{
    kernel_rank, normalized_error, spearman, MetricsRow, METRICS_COLUMNS, METRICS_SCHEMA,
};
pub use run::{
    prepare_trial, read_metrics, run_experiment, run_to_dir, select_hyperparameters, RunManifest,
    RunOutputs, Selection, TrialData,
};
