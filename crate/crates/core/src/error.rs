use thiserror::Error;

/// Errors raised by scoring, pooling, learning and the audit suites.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QaError {
    /// A forecast lies outside the rule's domain or is not a valid distribution.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("outcome index {index} out of range for {n} outcomes")]
    Index { index: usize, n: usize },

    /// The averaged exposure is not attained by any forecast in the domain.
    #[error("exposure out of range: {0}")]
    ExposureRange(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    /// An iterative solver stopped before reaching its tolerance.
    #[error("solver did not converge: {0}")]
    Convergence(String),
}

pub type Result<T> = std::result::Result<T, QaError>;
