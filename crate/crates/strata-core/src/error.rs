//! Error type shared by every module in the crate.

use alloc::string::String;

use crate::trainer::DivergenceReport;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Everything that can go wrong in the numeric core.
///
/// `InvalidInput` covers malformed arguments to a single operation (shape
/// mismatches, out-of-range ids, negative distances). `Validation` covers
/// structural problems detected when a config, label structure, or dataset
/// is checked as a whole. The two are kept apart so callers can map them to
/// different exit codes or messages.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// An argument to an operation was malformed.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A config, label structure, or dataset failed validation.
    #[error("validation failed: {0}")]
    Validation(String),
    /// The embedding head produced an exactly-zero vector, which cannot be
    /// L2-normalized.
    #[error("embedding has zero norm and cannot be normalized")]
    DegenerateEmbedding,
    /// A loss or gradient became non-finite during training. The report
    /// carries enough context to replay the offending step.
    #[error("training diverged at epoch {} step {}: {}", .0.epoch, .0.step, .0.detail)]
    Diverged(DivergenceReport),
}

impl Error {
    /// Shorthand used throughout the crate for `InvalidInput` with a
    /// formatted message.
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Shorthand for `Validation` with a formatted message.
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
