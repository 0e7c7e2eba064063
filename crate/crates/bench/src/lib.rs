//! Experiment harness for the triangulation methods: synthetic noise
//! sweeps, dataset evaluation, runtime measurement and summary CSV output.

pub mod descriptor;
pub mod experiment;
pub mod metrics;
pub mod report;

pub use descriptor::{ExperimentDescriptor, NoiseConfig, RuntimeConfig, MIN_RUNTIME_POINTS};
pub use experiment::{
    run_real_experiment, run_runtime_benchmark, run_synthetic_experiment, Report, ResidualKind,
};
pub use report::{write_summary, SummaryRow, SUMMARY_HEADER};

use sphtri::dataset::DatasetError;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("dataset error: {0}")]
    Dataset(#[from] DatasetError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl BenchError {
    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::Dataset(_) => 3,
            BenchError::Io(_) => 1,
        }
    }
}
