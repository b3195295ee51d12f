//! Error type for the command layer, with a stable exit-code mapping.

use std::path::Path;

use strata_core::trainer::DivergenceReport;

/// Result alias for the command layer.
pub type CliResult<T> = Result<T, CliError>;

/// Everything a command can fail with. Each variant maps to one process
/// exit code: validation problems (bad configs, unreadable or inconsistent
/// files, dimension mismatches) exit 2, training divergence exits 3, and a
/// failed gradient check exits 4.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Malformed or inconsistent input: config, dataset, checkpoint, or
    /// filesystem trouble.
    #[error("{0}")]
    Validation(String),
    /// Training produced a non-finite loss or gradient.
    #[error("training diverged at epoch {} step {}: {}", .0.epoch, .0.step, .0.detail)]
    Diverged(DivergenceReport),
    /// Analytic and finite-difference gradients disagree.
    #[error("{0}")]
    GradCheck(String),
}

impl CliError {
    /// The process exit code for this error.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Diverged(_) => 3,
            CliError::GradCheck(_) => 4,
        }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub(crate) fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Validation(format!("{}: {}", path.display(), err))
    }
}

impl From<strata_core::Error> for CliError {
    fn from(err: strata_core::Error) -> Self {
        match err {
            strata_core::Error::Diverged(report) => CliError::Diverged(report),
            other => CliError::Validation(other.to_string()),
        }
    }
}
