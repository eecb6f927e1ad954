//! Log ingestion and serialization: a flat record format (CSV) as the
//! universal ingestion surface, a hierarchical tree format (JSON) mirroring
//! the meta-model attribute names, log filtering, and file conversion.

pub mod filter;
pub mod flat;
pub mod tree;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_log, WorkflowLog};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: {message}")]
    Syntax { line: u64, message: String },
    #[error("unknown header column `{0}`")]
    UnknownColumn(String),
    #[error("missing required header column `{0}`")]
    MissingColumn(String),
    #[error("duplicate header column `{0}`")]
    DuplicateColumn(String),
    #[error("line {line}: unparseable timestamp `{value}` (expected RFC 3339)")]
    Timestamp { line: u64, value: String },
    #[error("line {line}: unknown lifecycle state `{value}`")]
    Lifecycle { line: u64, value: String },
    #[error("tree document rejected at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown log format `{0}` (expected `flat` or `tree`)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogFormat {
    Flat,
    Tree,
}

impl LogFormat {
    pub fn parse(s: &str) -> Result<Self, IoError> {
        match s.to_ascii_lowercase().as_str() {
            "flat" | "csv" => Ok(LogFormat::Flat),
            "tree" | "json" => Ok(LogFormat::Tree),
            other => Err(IoError::UnknownFormat(other.to_string())),
        }
    }

    /// Guesses the format from a file extension; flat for `.csv`, tree for
    /// `.json`, flat otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") | Some("tree") => LogFormat::Tree,
            _ => LogFormat::Flat,
        }
    }
}

/// Parses log text in the given format.
pub fn parse_log(text: &str, format: LogFormat) -> Result<WorkflowLog, IoError> {
    match format {
        LogFormat::Flat => flat::parse_flat(text),
        LogFormat::Tree => tree::parse_tree(text),
    }
}

/// Serializes a log in the given format. Output is byte-deterministic.
pub fn serialize_log(log: &WorkflowLog, format: LogFormat) -> String {
    match format {
        LogFormat::Flat => flat::serialize_flat(log),
        LogFormat::Tree => tree::serialize_tree(log),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversionSummary {
    pub events_read: usize,
    pub events_written: usize,
    pub violations: usize,
}

/// Reads a log file, re-serializes it in the target format and writes it out.
pub fn convert(
    input_path: &Path,
    input_format: LogFormat,
    output_path: &Path,
    output_format: LogFormat,
) -> Result<ConversionSummary, IoError> {
    let text = std::fs::read_to_string(input_path).map_err(|source| IoError::File {
        path: input_path.display().to_string(),
        source,
    })?;
    let log = parse_log(&text, input_format)?;
    let violations = validate_log(&log).violations.len();
    let out = serialize_log(&log, output_format);
    std::fs::write(output_path, &out).map_err(|source| IoError::File {
        path: output_path.display().to_string(),
        source,
    })?;
    let events = log.event_count();
    Ok(ConversionSummary {
        events_read: events,
        events_written: events,
        violations,
    })
}
