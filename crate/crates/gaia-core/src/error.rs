//! Error type shared by every module in this crate.

use thiserror::Error;

/// Failures surfaced by dataset generation, training, metrics, and rendering.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Two operands (or an operand and a model) disagree on dimensions.
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    /// A NaN or infinity showed up where only finite values are legal.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// An argument is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidInput(String),

    /// The input is technically well-formed but has no usable information
    /// (all points identical, rank-deficient design matrix, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Training produced a non-finite loss and cannot continue.
    #[error("training diverged at step {step}: {detail}")]
    Diverged { step: usize, detail: String },
}

pub type Result<T> = std::result::Result<T, CoreError>;
