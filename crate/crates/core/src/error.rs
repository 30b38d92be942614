use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("invalid model spec: {0}")]
    Spec(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("incompatible weights: {}", .differences.join("; "))]
    Compatibility { differences: Vec<String> },

    #[error("malformed weights file: {0}")]
    Format(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize, loss: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("run with seed {seed} failed: {source}")]
    Run { seed: u64, source: Box<Error> },
}

/// Coarse error classes, one per process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Compatibility,
    Numerical,
}

impl ErrorClass {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorClass::Usage => 2,
            ErrorClass::Data => 3,
            ErrorClass::Compatibility => 4,
            ErrorClass::Numerical => 5,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            ErrorClass::Usage => "usage",
            ErrorClass::Data => "data",
            ErrorClass::Compatibility => "compatibility",
            ErrorClass::Numerical => "numerical",
        }
    }
}

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Spec(_) | Error::Config(_) | Error::Dimension { .. } => ErrorClass::Usage,
            Error::Data(_) | Error::Split(_) | Error::Io { .. } | Error::Json(_) | Error::Format(_) => {
                ErrorClass::Data
            }
            Error::Compatibility { .. } => ErrorClass::Compatibility,
            Error::Domain(_) | Error::Training(_) | Error::NonFiniteLoss { .. } => ErrorClass::Numerical,
            Error::Run { source, .. } => source.class(),
        }
    }
}
