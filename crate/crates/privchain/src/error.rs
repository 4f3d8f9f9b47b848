use thiserror::Error;

/// Failures of the primitive layer.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("malformed encoding: {0}")]
    Encoding(&'static str),
    #[error("domain seed must not be empty")]
    EmptySeed,
    #[error("signing index makes x + index zero")]
    DegenerateIndex,
    #[error("hash-to-curve failed")]
    HashToCurve,
}
