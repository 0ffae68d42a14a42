use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument was outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A sliding-window test needs more blocks than are available.
    #[error("insufficient data: need {needed} intervals, have {available}")]
    InsufficientData { needed: usize, available: usize },

    /// Commitments below the smallest supported network fraction.
    #[error("unsupported hash-rate fraction {0}: minimum is 0.005")]
    UnsupportedHashRate(f64),

    /// An operation that the bond state machine does not allow.
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
