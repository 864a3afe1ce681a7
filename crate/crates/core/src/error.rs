//! Error taxonomy shared by the whole crate.
//!
//! Exit-code mapping for the CLI lives in `main.rs`: usage and config-schema
//! problems exit 1, numerical failures (convergence, domain, positivity) exit 2.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A derivative or state entry came out NaN/inf; names the offending slot.
    #[error("non-finite value in {component}")]
    NonFinite { component: String },

    /// An implicit solve ran out of iterations.
    #[error("{context}: no convergence after {iterations} iterations (residual {residual:.3e})")]
    Convergence {
        context: String,
        iterations: usize,
        residual: f64,
    },

    #[error("unsupported generating-series order {order} (supported: 1..=3)")]
    UnsupportedOrder { order: usize },

    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    /// Caller misuse: bad argument combinations, malformed flags, unknown kinds.
    #[error("{0}")]
    Usage(String),

    /// A density update produced a non-positive value.
    #[error("density lost positivity at grid index {index} (value {value:.6e})")]
    Positivity { index: usize, value: f64 },

    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Config deserialization failure; message names the offending keys.
    #[error("config schema error: {0}")]
    Schema(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors that should map to CLI exit code 1 (caller mistakes)
    /// rather than 2 (numerical failures).
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Usage(_) | Error::Schema(_) | Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
