use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// A config field is missing, malformed or inconsistent. `path` is
    /// dotted, e.g. `sweep.axes[0].values`.
    #[error("invalid config at {path}: {message}")]
    Config { path: String, message: String },
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write output: {0}")]
    Write(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit status: 2 for bad input, 3 for output failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Read { .. } => 2,
            _ => 3,
        }
    }

    /// One-line JSON diagnostic for stderr.
    pub fn diagnostic(&self) -> String {
        #[derive(Serialize)]
        struct Diagnostic<'a> {
            error: &'a str,
            #[serde(skip_serializing_if = "Option::is_none")]
            field: Option<&'a str>,
            message: String,
        }
        let (kind, field, message) = match self {
            CliError::Config { path, message } => ("config", Some(path.as_str()), message.clone()),
            CliError::Read { .. } => ("read", None, self.to_string()),
            _ => ("output", None, self.to_string()),
        };
        serde_json::to_string(&Diagnostic {
            error: kind,
            field,
            message,
        })
        .expect("diagnostic serializes")
    }
}
