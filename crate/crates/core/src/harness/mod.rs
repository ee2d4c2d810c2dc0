//! Data ingestion, synthetic generators, windowing and experiment orchestration.

pub mod config;
pub mod dataset;
pub mod experiment;
pub mod synthetic;
pub mod windows;

pub use config::{DataSource, ExperimentConfig, SyntheticKind};
pub use dataset::{ingest_csv, SpatioTemporalDataset};
pub use experiment::{
    ablation_variants, baselines, load_and_prepare, load_dataset, load_model, operating_point, prepare, run_ablations,
    run_experiment, sweep, train_model, train_variant, AblationOutput, ExperimentOutput, MethodSummary, OperatingPoint,
    Prepared, Report, ReportRow, REPORT_HEADER,
};
pub use windows::{make_windows, split_windows, split_windows_with, SplitWindows, Splits, Window};
