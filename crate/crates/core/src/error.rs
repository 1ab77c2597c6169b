use alloc::string::String;

pub type Result<T, E = HcmrError> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HcmrError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite role logits for concept {concept}, rule {rule}")]
    NumericFailure { concept: usize, rule: usize },

    #[error("inconsistent constraint: {0}")]
    InconsistentConstraint(String),

    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("intractable: {0}")]
    Tractability(String),

    #[error("parse error at {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),
}
