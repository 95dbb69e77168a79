use thiserror::Error;

/// Errors raised by the identification routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
    #[error("model order must be at least 1")]
    OrderZero,
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("no data")]
    EmptyData,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("output covariance is singular (zero noise variance with rank-deficient kernel term)")]
    SingularSigma,
    #[error("linear system is singular")]
    SingularSystem,
    #[error("noiseless output has zero variance")]
    ZeroOutputVariance,
    #[error("true impulse response is identically zero")]
    ZeroTruth,
    #[error("prediction horizon {k} is too long for {n} test samples")]
    HorizonTooLong { k: usize, n: usize },
    #[error("coordinate {0} has zero sample variance")]
    DegenerateVariance(usize),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("time column not consecutive at line {line}: expected {expected}, found {found}")]
    NonConsecutiveTime {
        line: usize,
        expected: i64,
        found: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
