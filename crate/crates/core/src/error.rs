use thiserror::Error;

use crate::data::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("subject {id}: event recorded at follow-up {t} after censoring")]
    ConventionConflict { id: String, t: usize },

    #[error("follow-up index {t} outside 1..={k}")]
    TimeOutOfRange { t: usize, k: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("ICE conflict for subject {id}: {reason}")]
    IceConflict { id: String, reason: String },

    #[error("strategy plan does not map ICE kind `{0}`")]
    PlanIncomplete(String),

    #[error("invalid strategy plan: {0}")]
    InvalidPlan(String),

    #[error("singular design matrix ({0})")]
    Singular(String),

    #[error("not identifiable at stage {stage}: {reason}")]
    NotIdentifiable { stage: usize, reason: String },

    #[error("no subjects in arm {0}")]
    EmptyArm(u32),

    #[error("pooling needs at least 2 successful imputations, got {0}")]
    TooFewImputations(usize),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("missing potential-outcome data: {0}")]
    MissingPotential(String),

    #[error("parse error at row {row}, column `{column}`: {reason}")]
    Parse { row: usize, column: String, reason: String },

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("dataset fails validation with {} violation(s)", .0.len())]
    Validation(Vec<Violation>),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
