use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {locus}: {message}")]
    Parse { locus: String, message: String },

    #[error("duplicate record id {0:?}")]
    DuplicateId(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("vocabulary is empty after preprocessing")]
    EmptyVocabulary,

    #[error("document {0:?} has no in-vocabulary tokens; likelihood is undefined")]
    EmptyDocument(String),

    #[error("agreement is undefined: {0}")]
    UndefinedAgreement(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("embedding lookup failed: key {0:?} not found")]
    MissingEmbedding(String),

    #[error("document {0:?} has no label")]
    Unlabeled(String),

    #[error("non-finite loss at epoch {epoch}: first offending term is `{term}`")]
    NonFinite { epoch: usize, term: &'static str },

    #[error("mapping list conflict: raw word {word:?} listed under both {first:?} and {second:?}")]
    MappingConflict {
        word: String,
        first: String,
        second: String,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(locus: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            locus: locus.into(),
            message: message.to_string(),
        }
    }

    /// Errors caused by bad user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::NonFinite { .. })
    }
}
