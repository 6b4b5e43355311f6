use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value failed validation. `field` names the offending input, using a
    /// dotted path for nested configuration (`operator.lambda0`).
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("point ({x1}, {x2}) lies outside the half disk")]
    OutsideDomain { x1: f64, x2: f64 },

    #[error("not enough nodes: need at least {needed}, found {found}")]
    TooFewNodes { needed: usize, found: usize },

    #[error("operator rejected: {0}")]
    OperatorRejected(String),

    #[error("inconsistent datum: {0}")]
    InconsistentDatum(String),

    #[error("gradient does not vanish at the blow-up center: |grad u| = {norm:.3e} > {limit:.3e}")]
    GradientNotVanishing { norm: f64, limit: f64 },

    #[error("{context}: parse error at line {line}, column {column}: {message}")]
    Parse {
        context: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("reports are not comparable: {0}")]
    Mismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}
