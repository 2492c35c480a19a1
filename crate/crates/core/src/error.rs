use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator and its diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    /// Two fields (or a field and a buffer) live on different grids.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A pointwise function was evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative solver did not reach its tolerance.
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// NaN or infinity appeared in a field.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Coefficients, initial data or a run configuration violate a hypothesis.
    #[error("validation failed: {0}")]
    Validation(String),

    /// Malformed configuration text.
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{path}: {source}")]
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

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Convergence { .. } | Error::NonFinite(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
