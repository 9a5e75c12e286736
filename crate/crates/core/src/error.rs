use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("singular matrix (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("non-finite value in {path}")]
    NonFinite { path: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate prior: {0}")]
    DegeneratePrior(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("training diverged at epoch {epoch}: {snapshot}")]
    Divergence { epoch: usize, snapshot: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
