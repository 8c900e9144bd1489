use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    /// The requested communication rate exceeds what the link supports at the
    /// given power.
    #[error("rate {requested} bits/use exceeds achievable maximum {max_rate} bits/use")]
    RateInfeasible { requested: f64, max_rate: f64 },

    #[error("did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("non-finite loss sample at trial {trial}")]
    NonFinite { trial: usize },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
