use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Inputs are individually valid but the requested operation needs
    /// something they do not provide (e.g. solving an MDP without reward).
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A factorization failed or an iterate stopped being finite.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// An iterative optimizer produced a non-finite objective.
    #[error("diverged after {iterations} iterations")]
    Diverged {
        iterations: usize,
        last_finite: Vec<f64>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn dimension(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            actual,
        }
    }
}
