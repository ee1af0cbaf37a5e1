use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Malformed {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{}:{line}: unknown entity uri `{uri}`", path.display())]
    DanglingUri { path: PathBuf, line: u64, uri: String },

    #[error("{}:{line}: relation `{relation}` is not declared in the relation manifest", path.display())]
    UnknownRelation {
        path: PathBuf,
        line: u64,
        relation: String,
    },

    #[error("entity `{uri}` has no edges")]
    IsolatedEntity { uri: String },

    #[error("pruning removed every entity")]
    DegenerateGraph,

    #[error("graph is empty")]
    EmptyGraph,

    #[error("unknown entity id {0}")]
    UnknownEntity(u32),

    #[error("unknown entity uri `{0}`")]
    UnknownUri(String),

    #[error("seed set is empty")]
    EmptySeedSet,

    #[error("all sampling weights are zero")]
    AllZeroWeights,

    #[error("only {available} eligible movies, need {needed}")]
    NotEnoughMovies { available: usize, needed: usize },

    #[error("every entity has already been asked")]
    Exhausted,

    #[error("answers do not match the pending batch: {0}")]
    AnswerMismatch(String),

    #[error("session is already done")]
    SessionDone,

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("no users to evaluate")]
    EmptyUserSet,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        Error::Malformed {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
