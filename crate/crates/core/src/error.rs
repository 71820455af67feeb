use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// The prox step violates `step < a`, so the scalar prox objective is not convex.
    #[error("invalid step {step}: must be strictly below a = {a}")]
    InvalidStep { step: f64, a: f64 },

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue})")]
    NotPsd { eigenvalue: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors caused by the caller's input rather than an internal failure.
    pub fn is_invalid_input(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_) | Error::InvalidStep { .. } | Error::NotPsd { .. } | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
