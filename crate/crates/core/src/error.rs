use thiserror::Error;

/// Errors raised by estimation, generation and policy routines.
#[derive(Debug, Error)]
pub enum CpteError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("arm {arm} is empty")]
    EmptyArm { arm: u8 },

    #[error("k = {k} exceeds the smallest arm size {arm_size}")]
    NeighborsExceedArm { k: usize, arm_size: usize },

    #[error("preference function is unbounded; CPTE and influence-function paths require w in [0, 1]")]
    UnboundedPreference,

    #[error("correlation target {target} unreachable; attainable range is [{lo:.4}, {hi:.4}]")]
    CorrelationUnreachable { target: f64, lo: f64, hi: f64 },

    #[error("quantile table is not monotone at x (level {level})")]
    NonMonotoneQuantiles { level: f64 },

    #[error("degenerate scores: every score difference is zero")]
    DegenerateScores,

    #[error("degenerate treatment assignment after {attempts} attempts")]
    DegenerateAssignment { attempts: usize },

    #[error("constant column {column}: rank correlation undefined")]
    ConstantColumn { column: usize },

    #[error("fold {fold} has an empty arm in its training part")]
    EmptyFold { fold: usize },
}

pub type Result<T> = std::result::Result<T, CpteError>;
