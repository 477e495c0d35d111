use thiserror::Error;

/// Errors produced by the inpainting library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum InpaintError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    /// Imaginary residual after overlap-add exceeds the tolerated fraction of the real peak.
    #[error("Hermitian symmetry violated: max |imag| = {imag:.3e}, max |real| = {real:.3e}")]
    SymmetryViolation { imag: f64, real: f64 },

    #[error("numerical breakdown in frame {frame}{}: {reason}", fmt_iteration(*.iteration))]
    NumericalBreakdown {
        frame: usize,
        iteration: Option<usize>,
        reason: String,
    },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),
}

fn fmt_iteration(iteration: Option<usize>) -> String {
    match iteration {
        Some(i) => format!(" (iteration {i})"),
        None => String::new(),
    }
}

impl InpaintError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        InpaintError::InvalidArgument(msg.into())
    }

    /// Attach a frame index (and optionally an iteration) to a numerical breakdown.
    pub fn at(self, frame: usize, iteration: Option<usize>) -> Self {
        match self {
            InpaintError::NumericalBreakdown { reason, .. } => InpaintError::NumericalBreakdown {
                frame,
                iteration,
                reason,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, InpaintError>;
