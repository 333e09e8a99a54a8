//! Error type shared by the image, patch, solver, and learning modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input (bad magic, unparsable header, inconsistent fields).
    #[error("format error: {0}")]
    Format(String),

    /// Payload shorter than the header promised.
    #[error("truncated input: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },

    /// Valid but out of scope (e.g. 16-bit sample depth).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Value outside its contractual range.
    #[error("out of range: {0}")]
    Range(String),

    /// Invalid argument or dimension mismatch.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Input degenerate for the requested operation (zero norm, empty state).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Solver or run configuration violates a constraint.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Iteration produced non-finite values.
    #[error("divergence: {0}")]
    Divergence(String),

    /// Line search or backtracking made no progress.
    #[error("stagnation: {0}")]
    Stagnation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
