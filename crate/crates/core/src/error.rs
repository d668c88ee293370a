use thiserror::Error;

/// Errors raised by the simulation and analysis kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not unitary (max deviation of U†U from I is {0:e})")]
    NotUnitary(f64),

    #[error("operator is not diagonal (max off-diagonal magnitude {0:e})")]
    NotDiagonal(f64),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time {t} lies outside the protocol window [0, {tau}]")]
    TimeOutOfRange { t: f64, tau: f64 },

    #[error("oscillator frequency {omega} is not positive at t = {t}")]
    NonpositiveFrequency { omega: f64, t: f64 },

    #[error("{0} is not supported")]
    Unsupported(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// An internal accuracy check (constraint, truncation, symplecticity) failed.
    #[error("numerical quality check failed: {0}")]
    NumericalQuality(String),
}

pub type Result<T> = std::result::Result<T, Error>;
