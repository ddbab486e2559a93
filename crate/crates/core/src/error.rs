use std::path::PathBuf;

/// Errors produced by the library and the command-line front end.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid simplex weights: {0}")]
    InvalidSimplex(String),

    #[error("invalid class priors: {0}")]
    InvalidPriors(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("gradient undefined on the simplex boundary (g[{index}] = 0)")]
    BoundaryGradient { index: usize },

    #[error("class {0} has no samples")]
    EmptyClass(usize),

    #[error("group (attribute {attribute}, class {class}) has no samples")]
    EmptyGroup { attribute: usize, class: usize },

    #[error("attribute value {0} has no samples")]
    EmptyAttribute(usize),

    #[error("dataset has no attribute column")]
    MissingAttributes,

    #[error("adjusted scores vanish: all probability mass sits on zero-weight classes")]
    DegenerateScores,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("{}: row {row} (line {line}): {message}", path.display())]
    Row {
        path: PathBuf,
        row: usize,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
