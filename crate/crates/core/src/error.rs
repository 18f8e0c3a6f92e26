use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SlopeError {
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("index set is empty")]
    EmptyIndexSet,

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("prox algorithms disagree at coordinate {index}: stack={stack}, pava={pava}")]
    AlgorithmDisagreement { index: usize, stack: f64, pava: f64 },
}

pub type Result<T> = std::result::Result<T, SlopeError>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(SlopeError::LengthMismatch { expected, found })
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> SlopeError {
    SlopeError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
