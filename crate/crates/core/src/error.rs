// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("matrix is not positive definite: pivot {pivot:e} at index {index}")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("degrees of freedom {dof} must exceed {min}")]
    InvalidDof { dof: f64, min: f64 },

    #[error("diagonal entry {index} is not positive ({value})")]
    NonPositiveDiagonal { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("column {column} has variance below 1e-12")]
    DegenerateColumn { column: usize },

    #[error(
        "insufficient samples: {available} draws leave {per_tail:.2} points in each tail at \
         level t = {level:e}, at least 10 are required"
    )]
    InsufficientSamples {
        level: f64,
        available: usize,
        per_tail: f64,
    },

    #[error("k = {k} is out of range 1..={m}")]
    KOutOfRange { k: usize, m: usize },

    #[error("stream ended after {got} of {expected} points")]
    StreamExhausted { expected: usize, got: usize },

    #[error("no grid level reached coverage {target}; coverage at the smallest level was {best}")]
    NoFeasibleLevel { target: f64, best: f64 },

    #[error(
        "online extreme set lost a needed point in dimension {dim}; increase the depth margin \
         (currently {margin})"
    )]
    OnlineNotCertified { dim: usize, margin: usize },

    #[error("{what} = {value} is out of range ({range})")]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: String,
    },

    #[error("could not construct a ground-truth matrix after {attempts} attempts")]
    ConstructionFailed { attempts: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: line {line}: expected {expected} columns, found {found}")]
    RaggedRows {
        path: PathBuf,
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("{path}: line {line}, column {column}: cannot parse {value:?} as a number")]
    NonNumericCell {
        path: PathBuf,
        line: u64,
        column: usize,
        value: String,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
