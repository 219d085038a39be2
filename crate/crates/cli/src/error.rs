use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config schema: {0}")]
    Schema(String),

    #[error("config field `{field}` violates {constraint}")]
    Validation { field: String, constraint: String },

    #[error(transparent)]
    Model(#[from] repcascade::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Error record written to stderr (and `error.json` when possible).
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub status: &'static str,
    pub kind: &'static str,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Schema(_) => "schema",
            CliError::Validation { .. } => "validation",
            CliError::Model(repcascade::Error::InvalidParameter { .. }) => "validation",
            CliError::Model(_) => "model",
            CliError::Io { .. } => "io",
            CliError::Csv(_) => "csv",
            CliError::Json(_) => "json",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "schema" | "validation" => 2,
            _ => 1,
        }
    }

    pub fn record(&self) -> ErrorRecord {
        ErrorRecord {
            status: "error",
            kind: self.kind(),
            message: self.to_string(),
            exit_code: self.exit_code(),
        }
    }
}
