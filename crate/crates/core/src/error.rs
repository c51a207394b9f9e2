use std::path::PathBuf;

/// Errors produced anywhere in the tracking library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported image format: {path}")]
    UnsupportedFormat { path: PathBuf },

    #[error("corrupt image file {path}: {reason}")]
    CorruptFile { path: PathBuf, reason: String },

    /// An inverse transform produced a non-negligible imaginary part, which
    /// means a conjugation convention was violated somewhere upstream.
    #[error("numeric consistency violated: {0}")]
    NumericConsistency(String),

    #[error("kl divergence undefined: reference is zero where the source has mass")]
    DivergenceUndefined,

    #[error("feature source error: {message}")]
    FeatureSource {
        message: String,
        #[source]
        cause: Option<std::io::Error>,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("tracking degenerate: {0}")]
    TrackingDegenerate(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn feature_source(msg: impl Into<String>, cause: Option<std::io::Error>) -> Self {
        Error::FeatureSource {
            message: msg.into(),
            cause,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
