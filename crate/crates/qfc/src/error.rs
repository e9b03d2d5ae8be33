use thiserror::Error;

use crate::quantizer::ScalarQuantizer;

/// Diagnostic payload attached to a convergence failure. The last iterate is
/// kept so callers can inspect or reuse it.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub context: &'static str,
    pub iterations: usize,
    pub last_decrease: f64,
    pub distortion: f64,
    pub quantizer: Option<ScalarQuantizer>,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate affine transform: scale must be nonzero")]
    DegenerateTransform,

    #[error("empty cell: interval [{lo}, {hi}] carries no probability mass")]
    EmptyCell { lo: f64, hi: f64 },

    #[error("invalid quantizer: {0}")]
    InvalidQuantizer(String),

    #[error("index {index} out of range ({len} cells)")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("degenerate codebook: all weighted centroids coincide")]
    DegenerateCodebook,

    #[error(
        "{} did not converge after {} iterations (last decrease {:.3e})",
        report.context, report.iterations, report.last_decrease
    )]
    ConvergenceFailure { report: Box<ConvergenceReport> },

    #[error("infeasible constraint: delta={delta} but the largest attainable cell mass is {max_cell_mass}")]
    InfeasibleConstraint { delta: f64, max_cell_mass: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Process exit code used by the CLI: 2 usage/config, 3 convergence, 4 infeasible.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConvergenceFailure { .. } => 3,
            Error::InfeasibleConstraint { .. } => 4,
            Error::Config(_) | Error::InvalidParameter { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
