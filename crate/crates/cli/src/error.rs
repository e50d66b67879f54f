use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("numerical failure at {point}: {source}")]
    Numerical {
        point: String,
        #[source]
        source: coopnet::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{failed} of {total} acceptance checks failed")]
    Acceptance { failed: usize, total: usize },
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Wraps an engine error raised while evaluating `point`. Input errors
    /// that only surface during evaluation still count as config errors.
    pub fn engine(point: impl Into<String>, source: coopnet::Error) -> Self {
        let point = point.into();
        if source.is_numerical() {
            CliError::Numerical { point, source }
        } else {
            CliError::Config {
                key: point,
                message: source.to_string(),
            }
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Io { .. } => 1,
            CliError::Numerical { .. } => 3,
            CliError::Acceptance { .. } => 4,
        }
    }
}
