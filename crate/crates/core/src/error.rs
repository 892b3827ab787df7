use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = SentError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SentError {
    /// A dataset line or config line that could not be parsed.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A parsed instance that breaks an `Instance` invariant.
    #[error("{message}, instance id={id}")]
    Validation { id: String, message: String },

    /// A caller handed an operation inputs that break its precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// The data is well-formed but unusable for the requested step
    /// (no gold labels, every instance filtered, ...).
    #[error("{0}")]
    Data(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl SentError {
    /// Stable, machine-readable category printed by the CLI.
    pub fn category(&self) -> &'static str {
        match self {
            SentError::Parse { .. } => "parse",
            SentError::Validation { .. } => "validation",
            SentError::Contract(_) => "contract",
            SentError::Numerical(_) => "numerical",
            SentError::Config(_) => "config",
            SentError::Data(_) => "data",
            SentError::Checkpoint(_) => "checkpoint",
            SentError::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        SentError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(id: &str, message: impl Into<String>) -> Self {
        SentError::Validation {
            id: id.to_string(),
            message: message.into(),
        }
    }
}
