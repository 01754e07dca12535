use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid model or experiment parameters.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// An argument outside the domain of an operation (n = 0, grid past the horizon, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A diagnostic was asked to judge a configuration its limit theorem does not cover.
    #[error("regime error in {test}: {requirement}")]
    Regime { test: &'static str, requirement: String },

    /// The diagnostic cannot reach a verdict with the given inputs.
    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("resource error: {0}")]
    Resource(String),

    #[error("experiment incomplete: {failed} replica(s) failed, first failure: {message}")]
    Incomplete { failed: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, found })
        }
    }
}
