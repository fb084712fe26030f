use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {dim} is not supported (direction numbers cover at most {max})")]
    UnsupportedDimension { dim: usize, max: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("probability {0} is outside the open interval (0, 1)")]
    ProbabilityDomain(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("covariance factorization failed for {n} points even with jitter {jitter:e}")]
    Factorization { n: usize, jitter: f64 },

    #[error("query point {index} is not part of the pinned discretization")]
    NotInDiscretization { index: usize },

    #[error("infeasible decision: {0}")]
    Infeasible(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown problem id `{0}`")]
    UnknownProblem(String),

    #[error("unsupported plot format `{0}` (supported: svg, png)")]
    UnsupportedFormat(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed result file: {0}")]
    Results(String),

    #[error("image encoding failed: {0}")]
    Image(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
