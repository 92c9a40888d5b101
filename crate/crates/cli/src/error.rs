use std::path::PathBuf;

use serde::Serialize;

/// Failure of one command, with the exit status it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("invalid config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{path}: {message}")]
    Schema {
        path: PathBuf,
        line: Option<u64>,
        message: String,
    },

    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] prepost_core::Error),
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage(message.into())
    }

    /// 0 success, 1 usage, 2 data or degeneracy, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => 1,
            CliError::Schema { .. } | CliError::Read { .. } => 2,
            CliError::Write { .. } => 3,
            CliError::Core(e) if e.is_data_error() => 2,
            CliError::Core(prepost_core::Error::NumericalFailure { .. }) => 3,
            CliError::Core(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config { .. } => "config",
            CliError::Schema { .. } => "schema",
            CliError::Read { .. } => "read",
            CliError::Write { .. } => "write",
            CliError::Core(e) => e.kind(),
        }
    }

    fn line(&self) -> Option<u64> {
        match self {
            CliError::Schema { line, .. } => *line,
            _ => None,
        }
    }

    /// `{"error":{"kind":..,"message":..,"line":..}}` on one line.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            message: String,
            #[serde(skip_serializing_if = "Option::is_none")]
            line: Option<u64>,
        }
        #[derive(Serialize)]
        struct Envelope<'a> {
            error: Body<'a>,
        }
        let envelope = Envelope {
            error: Body {
                kind: self.kind(),
                message: self.to_string(),
                line: self.line(),
            },
        };
        serde_json::to_string(&envelope).expect("error envelope serializes")
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
