use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("side mismatch: weights are {weights:?}, features are {features:?}")]
    SideMismatch {
        weights: crate::choice_model::Side,
        features: crate::choice_model::Side,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty candidate set")]
    EmptyCandidates,

    #[error("empty history: {0}")]
    EmptyHistory(&'static str),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
