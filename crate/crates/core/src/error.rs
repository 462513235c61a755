use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Operand shapes are incompatible.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An index is outside the declared matrix bounds.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    /// Matrix Market input could not be parsed. `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A caller-facing precondition does not hold (bad omega, zero column, ...).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The input is degenerate for the requested operation (all-zero matrix, Aᵀb = 0, ...).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// An API contract was broken (asymmetric input to a symmetric routine,
    /// history requested but not recorded, size caps, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
