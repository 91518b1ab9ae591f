use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("linear program failed: {0}")]
    Solver(String),

    #[error("dominated action(s) {actions:?}")]
    Dominated { actions: Vec<usize> },

    #[error("degenerate game: {0}")]
    Degenerate(String),

    #[error("game is not locally observable: unobservable neighbor pairs {pairs:?}")]
    NotLocallyObservable { pairs: Vec<(usize, usize)> },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("fixed outcome sequence exhausted at round {round}")]
    SequenceExhausted { round: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the `pm` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotLocallyObservable { .. } => 3,
            Error::Dominated { .. } | Error::Degenerate(_) => 4,
            Error::Parse(_) | Error::InvalidInput(_) => 2,
            _ => 1,
        }
    }
}
