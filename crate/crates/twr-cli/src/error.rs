//! CLI-level error classification and exit codes.
//!
//! Every failure is sorted into one of three buckets, and the process exit
//! code follows the bucket: `2` for configuration problems (bad flags, bad
//! config files, malformed or inconsistent inputs), `3` for numeric
//! failures (a factorization or fit that could not proceed), `4` for file
//! system failures.

use std::fmt;

use crate::model_io::FormatError;
use twr_core::Error as CoreError;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numeric(_) => "numeric",
            CliError::Io(_) => "io",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numeric(m) | CliError::Io(m) => m,
        }
    }

    /// Structured form for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": {
                "kind": self.kind(),
                "message": self.message(),
                "exit_code": self.exit_code(),
            }
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind(), self.message())
    }
}

impl std::error::Error for CliError {}

/// Whether a core error reflects bad input (config) rather than a numeric
/// failure discovered mid-computation.
fn core_is_config(err: &CoreError) -> bool {
    match err {
        CoreError::DimensionMismatch(_)
        | CoreError::NonFinite { .. }
        | CoreError::InvalidLength(_)
        | CoreError::FoldTooSmall(_)
        | CoreError::IndexOutOfRange { .. }
        | CoreError::InvalidParameter(_) => true,
        CoreError::CvCell { source, .. } => core_is_config(source),
        _ => false,
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        let message = err.to_string();
        if core_is_config(&err) {
            CliError::Config(message)
        } else {
            CliError::Numeric(message)
        }
    }
}

impl From<FormatError> for CliError {
    fn from(err: FormatError) -> Self {
        match err {
            FormatError::IoFailure { .. } => CliError::Io(err.to_string()),
            _ => CliError::Config(err.to_string()),
        }
    }
}
