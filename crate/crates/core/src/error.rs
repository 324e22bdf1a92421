use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: {message}")]
    Ingest { row: u64, message: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("i/o: {0}")]
    Io(#[from] io::Error),

    #[error("pass {pass}: i/o failure on pass file: {source}")]
    PassIo {
        pass: usize,
        #[source]
        source: io::Error,
    },

    #[error("dimension {dim} has no attribute id {id}")]
    UnknownValue { dim: usize, id: u32 },

    #[error("expected {expected} dimensions, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid carats: {0}")]
    InvalidCarats(String),

    #[error("SUM over a cube with negative measures has no unique diamond (override to proceed)")]
    NegativeMeasure,

    #[error("incompatible restrictions: {0}")]
    IncompatibleRestriction(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("budget exceeded for {what}: need {required}, limit {limit}")]
    BudgetExceeded {
        what: &'static str,
        required: f64,
        limit: f64,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),
}

impl Error {
    /// True for failures caused by the environment or resource limits rather
    /// than by malformed input.
    pub fn is_runtime(&self) -> bool {
        matches!(
            self,
            Error::Io(_) | Error::PassIo { .. } | Error::BudgetExceeded { .. }
        )
    }
}
