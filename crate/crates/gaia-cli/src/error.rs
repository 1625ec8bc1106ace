//! CLI-level errors with the exit-code mapping used by `main`: 0 success,
//! 2 configuration error, 3 training divergence, 4 I/O error. Unexpected
//! internal failures exit with 1.

use gaia_core::CoreError;
use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Bad config file, flag value, or incompatible checkpoint request.
    Config(String),
    /// Training produced non-finite values.
    Diverged(String),
    /// Filesystem failure, with the offending path.
    Io(String),
    /// Anything else (numeric degeneracy mid-pipeline, internal bugs).
    Internal(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Diverged(_) => 3,
            CliError::Io(_) => 4,
            CliError::Internal(_) => 1,
        }
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Diverged(m) => write!(f, "training diverged: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Post-validation mapping: by the time core errors escape the pipeline the
/// config has already been vetted, so only divergence keeps a dedicated code.
impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::Diverged { .. } => CliError::Diverged(err.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}
