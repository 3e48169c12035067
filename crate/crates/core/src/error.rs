use thiserror::Error;

/// Errors produced by the modeling, estimation and solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum HopError {
    /// A parameter is outside the domain an operation needs (e.g. `nu <= 8`
    /// for fourth moments).
    #[error("domain error: {0}")]
    Domain(String),

    /// The problem is larger than the configured cap of a dense-tensor path.
    #[error("size error: {n} exceeds the cap of {cap}")]
    Size { n: usize, cap: usize },

    /// Input data is malformed or non-finite.
    #[error("data error: {0}")]
    Data(String),

    /// Malformed tabular input with a precise location (1-based row/column).
    #[error("data error at row {row}, column {col}: {msg}")]
    DataAt { row: usize, col: usize, msg: String },

    /// Vectors/matrices of incompatible shapes.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// A factorization or special-function evaluation failed.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The safeguard line search shrank the step below the floor.
    #[error("line search exhausted: step {step:e} fell below {floor:e}")]
    LineSearchExhausted { step: f64, floor: f64 },

    /// `t·1 + varphi(w)` has a non-positive entry.
    #[error("shift violation: t + varphi_{index} = {value:e} is not positive")]
    ShiftViolation { index: usize, value: f64 },

    /// The fit is under-determined (too few observations).
    #[error("ill-posed problem: {0}")]
    IllPosed(String),

    /// Invalid configuration value.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl HopError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        HopError::Domain(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        HopError::Data(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        HopError::Numerical(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        HopError::Config(msg.into())
    }
}

impl From<std::io::Error> for HopError {
    fn from(e: std::io::Error) -> Self {
        HopError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, HopError>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(HopError::Dimension { expected, got })
    }
}
