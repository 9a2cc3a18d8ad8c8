use thiserror::Error;

use crate::solver::TraceRow;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("oracle limited to dimension {max}, got {dim}")]
    OracleScale { dim: usize, max: usize },

    #[error("insufficient data in {regime} regime: {rows} rows, need at least {needed}")]
    InsufficientData {
        regime: &'static str,
        rows: usize,
        needed: usize,
    },

    #[error("invalid regime model: {0}")]
    ModelInvalid(String),

    #[error("numerical failure at iteration {iteration}: {message}")]
    NumericalFailure {
        iteration: usize,
        message: String,
        trace: Vec<TraceRow>,
    },

    #[error("reference optimum is worse than iterate {iteration} by {excess:e}")]
    ReferenceQuality { iteration: usize, excess: f64 },

    #[error("unknown {registry} '{name}' (known: {known})")]
    UnknownStrategy {
        registry: &'static str,
        name: String,
        known: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
