use thiserror::Error;

/// Errors surfaced by the calculus and the text formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected n = {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("elements live on different deformation matrices")]
    ThetaMismatch,

    #[error("homogeneous component of degree {degree} equals -n; Euler primitive undefined")]
    NonDecomposable { degree: f64 },

    #[error("unsupported decomposition: {0}")]
    UnsupportedDecomposition(String),

    #[error("order {order} is an integer; the canonical trace needs a gauged evaluation")]
    IntegerOrder { order: f64 },

    #[error("lattice trace diverges: order {order} is not < -{n}")]
    DivergentTrace { order: f64, n: usize },

    #[error("invalid pivot: {0}")]
    InvalidPivot(String),

    #[error("invalid bump profile: {0}")]
    InvalidBump(String),

    #[error("operation requires a scalar-valued symbol")]
    NonScalarSymbol,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error in `{field}`: {msg}")]
    Config { field: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
