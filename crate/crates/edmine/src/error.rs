//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EdmError {
    #[error("missing input file: {0}")]
    MissingFile(PathBuf),
    #[error("{file}: missing required column `{column}`; available columns: [{}]", available.join(", "))]
    MissingColumn {
        file: String,
        column: String,
        available: Vec<String>,
    },
    #[error("{file} row {row}: {message}")]
    BadRow {
        file: String,
        row: usize,
        message: String,
    },
    #[error("{file} row {row}: unknown {what} label `{label}`")]
    UnknownLabel {
        file: String,
        row: usize,
        what: String,
        label: String,
    },
    #[error("{file} row {row}: {key} `{value}` does not resolve")]
    DanglingKey {
        file: String,
        row: usize,
        key: String,
        value: String,
    },
    #[error("feature error: {0}")]
    Feature(String),
    #[error("resample error: {0}")]
    Resample(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("selection error: {0}")]
    Selection(String),
    #[error("experiment error: {0}")]
    Experiment(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("train/test leakage: {0}")]
    Leakage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: {source}")]
    Csv {
        file: String,
        #[source]
        source: csv::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl EdmError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        EdmError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, EdmError>;
