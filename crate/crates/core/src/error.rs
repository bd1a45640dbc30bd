use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by model construction, inference and the oracles.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{0} is not positive definite")]
    NotPositiveDefinite(String),
    #[error("matrix is not symmetric within tolerance ({asymmetry:.3e} > {tolerance:.3e})")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },
    #[error("conditioning leaves no free dimensions")]
    EmptyFreeBlock,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("index {index} outside [{lo}, {hi}]")]
    IndexOutOfRange { index: usize, lo: usize, hi: usize },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("joint oracle dimension {dim} exceeds the limit of {max}")]
    TooLarge { dim: usize, max: usize },
    #[error("time index {k} cannot advance past horizon {horizon}")]
    HorizonExceeded { k: usize, horizon: usize },
}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
