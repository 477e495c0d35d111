use std::path::Path;

use nmf_inpaint::InpaintError;
use thiserror::Error;

/// Failure of an experiment, classified by process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, infeasible degradation or an unsupported configuration.
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::InvalidSpec(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl From<InpaintError> for CliError {
    fn from(err: InpaintError) -> Self {
        match err {
            InpaintError::NumericalBreakdown { .. } | InpaintError::SymmetryViolation { .. } => {
                CliError::Numerical(err.to_string())
            }
            other => CliError::InvalidSpec(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
