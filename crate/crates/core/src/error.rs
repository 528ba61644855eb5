use thiserror::Error;

/// Errors produced anywhere in the campaign engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("degenerate feature `{column}`: zero variance")]
    DegenerateFeature { column: String },

    #[error("infeasible surrogate space: constraint acceptance rate {acceptance_rate:.4}")]
    Infeasible { acceptance_rate: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("ill-conditioned kernel matrix: {0}")]
    Conditioning(String),

    #[error("degenerate labels: both classes must be present")]
    DegenerateLabels,

    #[error("insufficient data: need at least {needed} rows, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("constraint violation: {0}")]
    Constraint(String),

    #[error("invalid value: {0}")]
    Invalid(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("invalid state transition: {0}")]
    InvalidState(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Stable machine-readable code, used by the HTTP layer.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse_error",
            Error::Integrity(_) => "integrity_error",
            Error::DegenerateFeature { .. } => "degenerate_feature",
            Error::Infeasible { .. } => "infeasible",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Conditioning(_) => "conditioning",
            Error::DegenerateLabels => "degenerate_labels",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::Constraint(_) => "constraint_violation",
            Error::Invalid(_) => "invalid",
            Error::NotFound(_) => "not_found",
            Error::InvalidState(_) => "invalid_state",
            Error::Context { source, .. } => source.code(),
            Error::Io(_) => "io_error",
            Error::Json(_) => "json_error",
            Error::Csv(_) => "csv_error",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
