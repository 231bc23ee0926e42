//! Output plumbing: JSON/CSV emission and the error envelope.
//!
//! Errors leave on standard error as one JSON object
//! `{"stage": ..., "message": ..., "position": ...?}` with a nonzero
//! exit code; results leave on standard output or `--out`. CSV numbers
//! carry 17 significant digits with a `.` decimal separator, no locale
//! involvement anywhere.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;

/// Failure stage for the error envelope.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Args,
    Parse,
    Diagnose,
    Compute,
    Io,
}

/// Uniform CLI error: stage, message, optional source offset.
#[derive(Debug, Serialize)]
pub struct CliError {
    pub stage: Stage,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<usize>,
}

impl CliError {
    pub fn new(stage: Stage, message: impl fmt::Display) -> Self {
        CliError {
            stage,
            message: message.to_string(),
            position: None,
        }
    }

    pub fn args(message: impl fmt::Display) -> Self {
        Self::new(Stage::Args, message)
    }
}

impl From<laginv_core::Error> for CliError {
    fn from(err: laginv_core::Error) -> Self {
        use laginv_core::Error;
        match err {
            Error::Parse(p) => CliError {
                stage: Stage::Parse,
                message: p.message.clone(),
                position: Some(p.position),
            },
            Error::DiagnosticsRejected { .. } | Error::DivergentSeries { .. } => {
                Self::new(Stage::Diagnose, err)
            }
            other => Self::new(Stage::Compute, other),
        }
    }
}

pub fn emit_error(err: &CliError) {
    let body = serde_json::to_string(err).unwrap_or_else(|_| err.message.clone());
    eprintln!("{}", body);
}

/// Formats one float with 17 significant digits.
pub fn csv_num(v: f64) -> String {
    format!("{:.16e}", v)
}

/// Writes `content` to `out` or standard output.
pub fn write_output(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| CliError::new(Stage::Io, format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .map_err(|e| CliError::new(Stage::Io, e))
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| CliError::new(Stage::Io, e))
}
