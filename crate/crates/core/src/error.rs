use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error("game is not strict ({count} payoff collisions); enable weak mode to solve it")]
    NotStrict { count: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("turn policy: {0}")]
    Policy(String),

    #[error("internal invariant broken: {0}")]
    Internal(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("strategy has no action for a reachable context: {0}")]
    Coverage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Internal(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
