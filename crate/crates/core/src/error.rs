use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is not Hermitian: max |A - A^dag| = {max_asymmetry:e}")]
    NotHermitian { max_asymmetry: f64 },
    #[error("matrix is not unitary: max |U^dag U - 1| = {deviation:e}")]
    NotUnitary { deviation: f64 },
    #[error("not a density matrix: {reason}")]
    InvalidState { reason: String },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("eigensolver did not converge")]
    NoConvergence,
    #[error("coherence basis is ambiguous: the reference observable is degenerate; pass an explicit eigenbasis")]
    AmbiguousBasis,
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("logarithm undefined: xi = {xi:e} is not positive")]
    LogUndefined { xi: f64 },
    #[error("infeasible coherence target {target}: {reason}")]
    Infeasible { target: f64, reason: String },
    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
