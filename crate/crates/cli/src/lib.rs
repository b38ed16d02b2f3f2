//! Experiment harness: simulation runs with CSV output and theory tables.

pub mod config;
pub mod simulate;
pub mod theory_table;

use mas_core::MasError;
use thiserror::Error;

pub use config::{ProblemKind, RunConfig};
pub use simulate::{simulate, RunStatus, SimulationSummary};
pub use theory_table::{theory_rows, write_bounds, BoundsRow};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("coupling violated: {0}")]
    Coupling(String),

    #[error("solution blew up at step {step}")]
    BlowUp { step: usize },

    #[error("consistency check failed: {0}")]
    Check(String),

    #[error(transparent)]
    Solver(#[from] MasError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Coupling(_) => 2,
            CliError::BlowUp { .. } => 3,
            _ => 1,
        }
    }
}

/// Fixed 17-significant-digit form used for every real in the outputs.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}
