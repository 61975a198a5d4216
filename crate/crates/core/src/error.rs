use alloc::string::String;

use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("label {0} is not in the remap table")]
    UnknownLabel(i64),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("neighbor count k = {k} must satisfy 1 <= k < n = {n}")]
    NeighborCount { k: usize, n: usize },

    #[error("scale parameter must be positive and finite, got {0}")]
    NonPositiveScale(f64),

    #[error("vertex {0} has non-positive degree")]
    SingularDegree(usize),

    #[error("matrix is not symmetric at ({row}, {col}): difference {diff:e}")]
    Asymmetric { row: usize, col: usize, diff: f64 },

    #[error("eigenvalue {value} at position {index} is not below 1; use a smaller dimension or a larger beta")]
    EigenvalueTooLarge { index: usize, value: f64 },

    #[error("query outside model support")]
    OutsideSupport,
}
