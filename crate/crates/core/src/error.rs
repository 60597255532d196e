use std::path::PathBuf;

use thiserror::Error;

use crate::gtfs::GtfsError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("input file not found: {}", .0.display())]
    MissingInput(PathBuf),

    #[error(transparent)]
    Gtfs(#[from] GtfsError),

    /// A field or score vector that carries no information (all zeros,
    /// zero variance, too few samples).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A pipeline step was requested before the step it depends on.
    #[error("{0}")]
    State(String),

    /// Broken internal invariant; indicates a bug rather than bad input.
    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Csv {
        context: String,
        #[source]
        source: csv::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn csv(context: impl Into<String>, source: csv::Error) -> Self {
        Error::Csv {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    /// Process exit code used by the command-line tool: 2 for bad input,
    /// 3 for state or degenerate-data errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Degenerate(_) | Error::State(_) | Error::Internal(_) => 3,
            _ => 2,
        }
    }
}
