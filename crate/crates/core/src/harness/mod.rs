//! Experiment configuration, orchestration and CSV output.

mod compare;
mod config;
mod experiment;
mod report;

pub use compare::{compare_strategies, median, ComparisonTable, StrategyRow};
pub use config::{parse_config, ConfigBuilder, DatasetSpec, ExperimentConfig, SEED_ENV};
pub use experiment::{
    load_datasets, oracle_config, prepare, run_experiment, run_prepared, ExperimentOutcome,
    Prepared,
};
pub use report::{render_history_csv, write_csv_atomic, write_history_csv, CSV_HEADER};

pub use crate::federation::RoundRecord;
