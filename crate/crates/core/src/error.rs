use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("point does not lie on {expected}: {found}")]
    ManifoldMismatch { expected: String, found: String },

    #[error("{path}:{line}: parse error: {msg}")]
    MeshParse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid mesh: {0}")]
    MeshValidation(String),

    #[error("{0}")]
    Cache(#[from] CacheError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate weights (κ too large for spectrum)")]
    DegenerateWeights,

    #[error("kernel matrix numerically indefinite: {0}")]
    Indefinite(String),

    #[error("optimizer aborted: {0}")]
    OptimizerAborted(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CacheError {
    #[error("not a cache file")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated cache file")]
    Truncated,
    #[error("checksum mismatch")]
    Checksum,
    #[error("malformed cache header: {0}")]
    Malformed(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
