use std::fmt;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("assembly defect: smallest eigenvalue {smallest} is not positive")]
    Assembly { smallest: f64 },
    #[error("ill-conditioned operator (estimated condition number {condition:.3e})")]
    Conditioning { condition: f64 },
    #[error("ground state changes sign (most negative relative value {min_relative:.3e})")]
    Irreducibility { min_relative: f64 },
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("heat kernel underflows at t = {t} (λ₀ t = {exponent:.1}); use t ≤ {t_max:.3e}")]
    Underflow { t: f64, exponent: f64, t_max: f64 },
    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl fmt::Display) -> Self {
        Error::Domain(msg.to_string())
    }

    pub(crate) fn shape(msg: impl fmt::Display) -> Self {
        Error::Shape(msg.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
