use thiserror::Error;

/// Failures surfaced by the command-line front end. Every variant names the
/// offending object.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("parse error in {source_name} at line {line}, column {column}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation error in {object}: {reason}")]
    Validation { object: String, reason: String },

    #[error("negative count in row {row}: {count}")]
    NegativeCount { row: usize, count: i64 },

    #[error("{context}: {source}")]
    Numerical {
        context: String,
        source: qmt_core::Error,
    },

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 1,
            CliError::Parse { .. } | CliError::Validation { .. } | CliError::NegativeCount { .. } => 2,
            CliError::Numerical { .. } => 3,
        }
    }

    pub(crate) fn validation(object: impl Into<String>, reason: impl ToString) -> Self {
        CliError::Validation {
            object: object.into(),
            reason: reason.to_string(),
        }
    }

    pub(crate) fn numerical(context: impl Into<String>, source: qmt_core::Error) -> Self {
        CliError::Numerical {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn json(source_name: &str, e: &serde_json::Error) -> Self {
        CliError::Parse {
            source_name: source_name.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
