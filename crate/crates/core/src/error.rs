use std::path::PathBuf;

use thiserror::Error;

use crate::lattice::LatticeError;
use crate::scorer::ScorerError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate utterance id {id:?} (line {line})")]
    DuplicateId { id: String, line: usize },

    #[error("utterance {0:?} has no reference")]
    MissingReference(String),

    #[error("expected {expected} items, got {actual}")]
    Arity { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("could not parse a selection from the response")]
    Selection,

    #[error(transparent)]
    Lattice(#[from] LatticeError),

    #[error(transparent)]
    Scorer(#[from] ScorerError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
