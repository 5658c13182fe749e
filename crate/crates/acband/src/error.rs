//! Crate-wide error type and result alias.

use thiserror::Error;

use crate::domain::{ConfigId, InstanceId};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("n0 must lie in (N, 2N] = ({n}, {two_n}], got {n0}")]
    InvalidN0 { n0: u64, n: u64, two_n: u64 },

    #[error("insufficient budget: {0}")]
    InsufficientBudget(String),

    #[error("pool exhausted: {0}")]
    PoolExhausted(String),

    #[error("infeasible alpha: {0}")]
    InfeasibleAlpha(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-positive runtime at row {row}, column {col}: {value}")]
    NonPositiveRuntime { row: usize, col: usize, value: f64 },

    #[error("malformed file: {0}")]
    MalformedFile(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("instance {} was already consumed in this run", .0 .0)]
    InstanceReuse(InstanceId),

    #[error("configuration {} does not appear in the subset", .0 .0)]
    ConfigNotInSubset(ConfigId),

    #[error("failed to spawn process: {0}")]
    SpawnFailure(String),

    #[error("process exited with non-zero status: {0}")]
    NonZeroExit(String),

    #[error("missing gap data: {0}")]
    MissingGapData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
