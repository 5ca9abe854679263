//! Error type shared by every module of the crate.

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by construction, estimation, simulation, and I/O.
///
/// `Io` is the only variant that maps to exit code 2 in the CLI; everything
/// else is a precondition or input failure (exit code 1).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),

    #[error("invalid sequence: {0}")]
    InvalidSequence(String),

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("depth exceeded: need depth {needed}, trie has {available}")]
    DepthExceeded { needed: usize, available: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("reducible embedding: multiple closed communicating classes: {0}")]
    Reducible(String),

    #[error("periodic embedding: period {period} on class containing {state}")]
    Periodic { period: usize, state: String },

    #[error("transient: no stationary regime (sum of renewal probabilities converges)")]
    Transient,

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Wraps an I/O error with the path it occurred on.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
