use mindreader_core::Error as CoreError;
use thiserror::Error;

/// Exit code 2 for bad input or usage, 1 for failures of the run itself.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Io { .. }
            | CoreError::Malformed { .. }
            | CoreError::DanglingUri { .. }
            | CoreError::UnknownRelation { .. }
            | CoreError::IsolatedEntity { .. }
            | CoreError::DegenerateGraph
            | CoreError::EmptyGraph
            | CoreError::UnknownUri(_)
            | CoreError::InvalidArgument(_)
            | CoreError::Checkpoint(_) => CliError::Input(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
