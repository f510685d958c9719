use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("unsupported orbit: {0}")]
    UnsupportedOrbit(String),

    #[error("degenerate orbit: {0}")]
    DegenerateOrbit(String),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("rejected initial condition: {0}")]
    RejectedIc(String),

    #[error("numerical instability: {0}")]
    Instability(String),

    #[error("empty set: {0}")]
    EmptySet(String),

    #[error("infeasible ranges: {0}")]
    Infeasible(String),

    #[error("sweep aborted: {failed} of {total} runs failed")]
    SweepAborted { failed: usize, total: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data: {0}")]
    Parse(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 for configuration problems, 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse(_) | Error::Infeasible(_) | Error::RejectedIc(_) => 2,
            Error::Io { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
