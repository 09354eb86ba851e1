use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure classes. The CLI maps these onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Io,
    Validation,
    Degenerate,
    Config,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed tensor file {}: {reason}", path.display())]
    MalformedTensor { path: PathBuf, reason: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },

    #[error("cannot parse manifest {}: {reason}", path.display())]
    ManifestParse { path: PathBuf, reason: String },

    #[error("duplicate stimulus id {0:?}")]
    DuplicateId(String),

    #[error("unknown role {0:?} (expected target_x, target_y, attribute_a or attribute_b)")]
    UnknownRole(String),

    #[error("dataset failed validation with {0} issue(s)")]
    Validation(usize),

    #[error("zero-norm embedding")]
    ZeroNorm,

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("record {0:?} has no valence label")]
    MissingLabel(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::MalformedTensor { .. }
            | Error::ShapeMismatch(_)
            | Error::NonFinite { .. }
            | Error::ManifestParse { .. }
            | Error::DuplicateId(_)
            | Error::UnknownRole(_)
            | Error::Validation(_)
            | Error::MissingLabel(_) => ErrorKind::Validation,
            Error::ZeroNorm | Error::DegenerateVariance(_) => ErrorKind::Degenerate,
            Error::Empty(_) | Error::Config(_) => ErrorKind::Config,
        }
    }
}
