use thiserror::Error;

use crate::causal_tree::LeafReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty cohort")]
    EmptyCohort,

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("C-index undefined: no comparable pairs")]
    ConcordanceUndefined,

    #[error("both treatments required")]
    BothTreatmentsRequired,

    #[error("dimension mismatch: expected {expected} covariates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no out-of-bag coverage: every record is in-bag for every tree")]
    NoOobCoverage,

    #[error("no fitted model for leaf {} ({})", .0.leaf_id, .0.path_string())]
    NoFittedModel(Box<LeafReport>),

    #[error("unknown subgroup: {0}")]
    UnknownSubgroup(String),

    #[error("row {row}, column {column}: {message}")]
    Data {
        row: usize,
        column: String,
        message: String,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn data(row: usize, column: &str, message: impl Into<String>) -> Self {
        Error::Data {
            row,
            column: column.to_string(),
            message: message.into(),
        }
    }
}
