use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index out of range: {0}")]
    Range(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("input validation failed: {0}")]
    InputValidation(String),

    #[error("degenerate contraction at power iteration {iteration}: normalizer {value:e}")]
    DegenerateContraction { iteration: usize, value: f64 },

    #[error("degenerate normalization on pair {pair}: {line} is identically zero")]
    DegenerateNormalization { pair: usize, line: String },

    #[error("non-finite value encountered: {0}")]
    Numeric(String),

    #[error("virtual candidate on frame slot {frame} read before its center was resolved")]
    UnresolvedVirtual { frame: usize },

    #[error("instance too large for exhaustive enumeration: {0}")]
    SizeGuard(String),

    #[error("finite-difference probe produced a non-finite value at coordinate {coordinate}")]
    Probe { coordinate: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("internal invariant violated: {0}")]
    InternalInvariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
