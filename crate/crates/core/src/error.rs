use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Invalid configuration, e.g. a sphere with `d < 3`.
    #[error("configuration error: {0}")]
    Config(String),
    /// Operands with incompatible shapes.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Exact integer arithmetic left the 64-bit range.
    #[error("integer overflow: {0}")]
    Overflow(String),
    /// Factorization, eigen-solver or quadrature failure.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = core::result::Result<T, Error>;
