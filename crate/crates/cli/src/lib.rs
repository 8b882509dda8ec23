//! Experiment harness for the `paraexp` binary: configuration, runs of the
//! RLC and cavity experiments, error reports and CSV output.

// `!(x > 0.0)` guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{Experiment, ExpmKind, GridSize, RunArgs, RunConfig};
pub use experiments::{reference_solution, run_rlc, run_wave, wave_problem, RlcOutcome, WaveOutcome};
pub use report::{compute_errors, CsvTable, ErrorReport};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Numerical(#[from] paraexp::Error),
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for configuration errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io { .. } => 1,
        }
    }
}
