use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("table of dimension {k} needs {expected} entries, got {got}")]
    EntryCount { k: usize, expected: usize, got: usize },

    #[error("dimension {k} exceeds the configured maximum of {max}")]
    DimensionTooLarge { k: usize, max: usize },

    #[error("entry {index} is {value}, entries must be greater than {floor}")]
    NonPositiveEntry { index: usize, value: f64, floor: f64 },

    #[error("variable index {index} out of range for a table of dimension {k}")]
    VariableOutOfRange { index: usize, k: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid cell index: {0}")]
    InvalidCell(String),

    #[error("invalid margin mask: {0}")]
    InvalidMask(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A parameter produced a non-finite value (overflow in `exp`, log of
    /// zero, a user function returning NaN, ...).
    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error("degenerate marginal for variable {variable}: P(X = 1) = {mean}")]
    DegenerateMarginal { variable: usize, mean: f64 },

    /// The parameter vector does not belong to any strictly positive table.
    #[error("parameters are not realizable: reconstructed entry {index} is {value}")]
    NonRealizableParams { index: usize, value: f64 },

    #[error("no convergence after {iterations} cycles (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("{0}")]
    Parse(String),
}
