use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty minibatch")]
    EmptyBatch,

    #[error("minibatch size mismatch: gradients have {gradients} rows, curvatures have {curvatures}")]
    BatchMismatch { gradients: usize, curvatures: usize },

    #[error("non-finite gradient in dimension {dim}")]
    NonFiniteGradient { dim: usize },

    #[error("non-finite curvature in dimension {dim}")]
    NonFiniteCurvature { dim: usize },

    #[error("optimizer state used before bootstrap")]
    NotBootstrapped,

    #[error("optimizer state already bootstrapped")]
    AlreadyBootstrapped,

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid value for `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("missing records: {0}")]
    MissingRecords(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }
}
