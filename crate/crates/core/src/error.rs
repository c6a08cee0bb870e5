use thiserror::Error;

use crate::circuit::Circuit;

/// Errors produced by the tomography toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("basis is not orthogonal (max deviation {deviation:.3e})")]
    NonOrthogonalBasis { deviation: f64 },

    #[error("environment distribution is not stationary (discarded component {residual:.3e})")]
    NonStationary { residual: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("moment sequence is not positive definite: leading minor {minor} has pivot {pivot:.3e}")]
    HankelNotPositive { minor: usize, pivot: f64 },

    #[error("gate {0} is not defined in this model")]
    UnknownGate(String),

    #[error("circuit mean {mean} lies outside [0, 1]; the model is inconsistent")]
    MeanOutOfRange { mean: f64 },

    #[error("rejection sampling gave up after {attempts} draws ({accepted} accepted, rate {rate:.4})")]
    RejectionCap { attempts: usize, accepted: usize, rate: f64 },

    #[error("matrix is singular or numerically singular (condition number {condition:.3e})")]
    Singular { condition: f64 },

    #[error("matrix condition number {condition:.3e} exceeds the bound {bound:.3e}")]
    IllConditioned { condition: f64, bound: f64 },

    #[error("projection is not a symmetric idempotent (deviation {deviation:.3e})")]
    NotProjection { deviation: f64 },

    #[error("bound violated on sequence {sequence}: lhs {lhs:.6e} > rhs {rhs:.6e}")]
    BoundViolation { sequence: Circuit, lhs: f64, rhs: f64 },

    #[error("zero variance in record {index} and no variance floor configured")]
    ZeroVariance { index: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
