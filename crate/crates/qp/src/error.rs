use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("malformed sparse matrix: {0}")]
    Malformed(String),
    #[error("invalid bounds at row {row}: lower {lower} > upper {upper}")]
    Bounds { row: usize, lower: f64, upper: f64 },
    #[error("objective matrix must be upper triangular with a nonnegative diagonal: {0}")]
    Objective(String),
    #[error("zero pivot at column {0} during LDL' factorization")]
    ZeroPivot(usize),
    #[error("fill-reducing ordering failed: {0}")]
    Ordering(String),
    #[error("triplet dump: {0}")]
    Dump(String),
}
