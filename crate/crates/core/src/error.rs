use std::io;

/// Errors produced anywhere in the key-agreement laboratory.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("numerical divergence at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("degenerate secret: cannot normalize the zero vector")]
    DegenerateSecret,

    #[error("state space too large: {size:.3e} configurations exceeds the limit {limit:.3e}")]
    StateSpaceTooLarge { size: f64, limit: f64 },

    #[error("singular value decomposition failed: {0}")]
    Factorization(String),

    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("empty input: {0}")]
    Empty(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn in_round(self, round: usize) -> Self {
        Error::Round {
            round,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
