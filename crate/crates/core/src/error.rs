use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config at `{path}`: {reason}")]
    InvalidConfig { path: String, reason: String },

    #[error("link unavailable (rate {0} bits/s)")]
    LinkUnavailable(f64),

    #[error("request from terminal {terminal} but only {num_terminals} terminals")]
    InvalidRequest { terminal: usize, num_terminals: usize },

    #[error("invalid call: {0}")]
    InvalidCall(String),

    #[error("action space too large: {0} terminals (limit {1})")]
    ActionSpaceTooLarge(usize, usize),

    #[error("simulation invariant violated: {0}")]
    Invariant(String),

    #[error("training diverged after {steps} steps (non-finite loss)")]
    Diverged { steps: u64 },

    #[error("missing checkpoint: {}", .0.display())]
    MissingCheckpoint(PathBuf),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
