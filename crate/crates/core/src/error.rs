use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("the binary raster contains no excursion boundary")]
    NoExcursionBoundary,

    #[error("Matérn smoothness nu = {nu} gives non-differentiable paths (need nu > 1)")]
    NonSmoothModel { nu: f64 },

    #[error(
        "circulant embedding failed on a {size}x{size} torus: minimum eigenvalue {min_eigenvalue:e} \
         (max {max_eigenvalue:e}); enlarge the embedding"
    )]
    EmbeddingFailure { size: usize, min_eigenvalue: f64, max_eigenvalue: f64 },

    #[error("MAPE undefined: reference value at index {index} is zero")]
    UndefinedMape { index: usize },

    #[error("sample covariance matrix is singular")]
    DegenerateCovariance,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Whether the error stems from a numerical failure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::EmbeddingFailure { .. } | Error::DegenerateCovariance | Error::NoExcursionBoundary)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
