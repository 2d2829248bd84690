use thiserror::Error;

/// Errors raised by kernels, predictors and diagnostics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("ill-conditioned design: Cholesky failed at leading minor {minor} with jitter {jitter:e}")]
    IllConditioned { minor: usize, jitter: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::IllConditioned { .. } | Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}
