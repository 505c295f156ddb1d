//! Datasets, synthetic signals, experiment orchestration and benchmarking.

pub mod bench;
pub mod config;
pub mod dataset;
pub mod experiment;
pub mod report;
pub mod synth;

pub use bench::{run_bench, BenchConfig, BenchResult};
pub use config::{CvSettings, DatasetSource, ExperimentConfig, FixedHyper, Selection};
pub use dataset::{load_signals, make_lagged_pairs, pair_signals, split_columns, Dataset, Pairing};
pub use experiment::{prepare_data, run_and_emit, run_expansion_experiment, PreparedData};
pub use report::{emit_report, Aggregate, ExperimentReport, Method, ReportRow, Truth, REPORT_HEADER};
pub use synth::{generate, synth_smooth, SyntheticData, SyntheticSpec};
