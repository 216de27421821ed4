use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column `{column}` not found in {path}")]
    MissingColumn { column: String, path: PathBuf },

    #[error("row {row}: treatment column `{column}` has non-binary value `{value}`")]
    NonBinaryTreatment {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}: column `{column}` has non-finite or unparseable value `{value}`")]
    NonFiniteValue {
        row: usize,
        column: String,
        value: String,
    },

    #[error("arm {arm} has no observations")]
    EmptyArm { arm: u8 },

    #[error("arm {arm} has {rows} rows; at least {required} are needed for {covariates} covariates")]
    InsufficientRows {
        arm: u8,
        rows: usize,
        required: usize,
        covariates: usize,
    },

    #[error("covariate dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("benchmark column is present on some rows but not others")]
    PartialBenchmark,

    #[error("dataset has no benchmark covariate")]
    NoBenchmark,

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("invalid sensitivity parameter: {0}")]
    InvalidSensitivityParam(String),

    #[error("cannot aggregate an empty collection")]
    EmptyCollection,

    #[error("invalid sensitivity prior: {0}")]
    InvalidPrior(String),

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("stratum has zero probability mass: {0}")]
    ZeroMassStratum(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
