use thiserror::Error;

/// Errors raised by the phase-space library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("coordinate covariance matrix is singular or not positive-definite")]
    SingularCovariance,

    #[error("Gaussian does not decay along axis {axis}")]
    NonDecaying { axis: usize },

    #[error("moments do not satisfy the saturation identity (relative residual {residual:.3e})")]
    NotSaturated { residual: f64 },

    #[error("grid coverage: {0}")]
    Coverage(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("gauge mismatch: analyzing family uses {family}, requested {requested}")]
    GaugeMismatch { family: String, requested: String },

    #[error("state is not normalized (norm² = {0:.12})")]
    NotNormalized(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
