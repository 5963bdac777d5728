use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("row {row}: column index {column} out of range for dimension {dim}")]
    ColumnOutOfRange { row: usize, column: usize, dim: usize },

    #[error("row {row}: column indices must be strictly increasing")]
    UnsortedRow { row: usize },

    #[error("row {row} has zero norm")]
    ZeroRow { row: usize },

    #[error("constraint system has no rows")]
    EmptySystem,

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("iterates {lo}..={hi} are not of monotone proximity (fails at index {index})")]
    NotMonotone { lo: usize, hi: usize, index: usize },

    #[error("invalid slice bounds [{lo}, {hi}] for trace of length {len}")]
    BadSlice { lo: usize, hi: usize, len: usize },

    #[error("proximity {value} outside curve range [{min}, {max}]")]
    OutOfCurveRange { value: f64, min: f64, max: f64 },

    #[error("probe budget of {budget} exhausted at outer iteration {k}, phase {n}")]
    ProbeBudgetExhausted { budget: u64, k: usize, n: usize },

    #[error("nonascent provider requires a gradient, which this target does not supply")]
    GradientUnavailable,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
