//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by any operation in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A similarity vector or feature map contained no entries.
    #[error("input must contain at least one entry")]
    EmptyInput,

    /// A NaN or infinity was found where finite data is required.
    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    /// Top-k selection width of zero.
    #[error("k must be at least 1")]
    ZeroK,

    /// Two buffers that must agree in length did not.
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    /// Dense Jacobian materialization is guarded to test scale.
    #[error("dense Jacobian requested for n = {n}, limit is {limit}")]
    JacobianTooLarge { n: usize, limit: usize },

    /// A position index fell outside the feature map.
    #[error("index {index} out of range for {n} positions")]
    IndexOutOfRange { index: usize, n: usize },

    /// Projection matrix shape incompatible with the feature map.
    #[error("{role} map expects {expected} input channels, feature map has {actual}")]
    ChannelMismatch {
        role: &'static str,
        expected: usize,
        actual: usize,
    },

    /// Invalid configuration value.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The patch search produced fewer than two candidates for some query.
    #[error("degenerate search space: {0}")]
    DegenerateSearch(String),

    /// A score sits on a support boundary, where the derivative is
    /// undefined; finite differences skip such inputs.
    #[error("score {index} is within {distance:e} of the threshold")]
    TieAdjacent { index: usize, distance: f64 },

    /// An image file could not be parsed.
    #[error("malformed image {path}: {reason}")]
    MalformedImage { path: PathBuf, reason: String },

    /// File I/O failure, with the offending path attached.
    #[error("i/o error on {path}: {source}")]
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

    pub(crate) fn malformed(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::MalformedImage {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Validates that every entry of `values` is finite.
pub(crate) fn ensure_finite(values: &[f64]) -> Result<()> {
    for (index, &value) in values.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { index, value });
        }
    }
    Ok(())
}
