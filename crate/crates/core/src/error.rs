use thiserror::Error;

/// Errors raised by the center-outward pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("solver failure: {0}")]
    SolverFailure(String),

    /// The pairing is not cyclically monotone (or only weakly so) and
    /// retries did not repair it.
    #[error("certification failed: minimum cycle mean {epsilon_star:e} on cycle {cycle:?}")]
    Certification { epsilon_star: f64, cycle: Vec<usize> },

    /// The smoothing bound is not positive, so no Moreau regularization
    /// interpolates the pairs.
    #[error("pairing is not interpolable: epsilon0 = {0:e}")]
    NotInterpolable(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
