//! Error taxonomy shared by the library and the CLI.
//!
//! Variants map one-to-one onto the process exit codes of the batch
//! interface, so library callers and the CLI agree on failure classes.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad usage, malformed configuration, or sizing violations.
    #[error("config: {0}")]
    Config(String),

    /// The requested computation is outside the admissible parameter
    /// regime (supercritical speed, no negative-energy well, ...).
    #[error("regime: {0}")]
    Regime(String),

    /// Persisted artifacts disagree with the active configuration.
    #[error("artifact mismatch: {0}")]
    Mismatch(String),

    /// An iterative solver failed to converge or a linear solve broke down.
    #[error("solver: {0}")]
    Solver(String),

    /// Non-finite or otherwise invalid field data.
    #[error("domain: {0}")]
    Domain(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the batch interface.
    /// 0 success, 2 usage/config, 3 regime refusal, 4 artifact mismatch,
    /// 5 solver failure; 1 is reserved for uncontracted failures (I/O).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) => 2,
            Error::Regime(_) => 3,
            Error::Mismatch(_) => 4,
            Error::Solver(_) => 5,
            Error::Io(_) | Error::Serde(_) => 1,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn regime(msg: impl Into<String>) -> Self {
        Error::Regime(msg.into())
    }

    pub fn mismatch(msg: impl Into<String>) -> Self {
        Error::Mismatch(msg.into())
    }

    pub fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
