use thiserror::Error;

#[derive(Debug, Error)]
pub enum HlspError {
    #[error("empty hierarchy")]
    EmptyHierarchy,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry in {0}")]
    NonFiniteEntry(String),
    #[error("invalid level count {0}")]
    InvalidP(usize),
    #[error("matrix not positive definite (pivot {pivot:e} at {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("schur complement not invertible at level {0}")]
    SchurNotInvertible(usize),
    #[error("all polynomial coefficients are zero")]
    AllCoefficientsZero,
    #[error("projection failed: {0}")]
    ProjectionFailure(String),
    #[error("singular linear system: {0}")]
    SingularSystem(String),
    #[error("point not converged (residual {0:e})")]
    PointNotConverged(f64),
    #[error("maximum iterations exceeded ({0})")]
    MaxItersExceeded(usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HlspError>;
