use std::path::{Path, PathBuf};

use serde::Serialize;

/// Exit status for malformed input files, configuration and arguments.
pub const EXIT_INPUT: i32 = 2;
/// Exit status for failures inside a pipeline stage.
pub const EXIT_STAGE: i32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}:{line}{}: {message}", file.display(), column.as_ref().map(|c| format!(", column {c}")).unwrap_or_default())]
    Input { file: PathBuf, line: u64, column: Option<String>, message: String },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{stage}: {source}")]
    Stage { stage: &'static str, source: jndmap_core::Error },

    #[error("{0}")]
    Usage(String),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub fn io(path: impl AsRef<Path>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.as_ref().to_path_buf();
        move |source| CliError::Io { path, source }
    }

    pub fn stage(stage: &'static str) -> impl FnOnce(jndmap_core::Error) -> CliError {
        move |source| CliError::Stage { stage, source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Stage { .. } => EXIT_STAGE,
            _ => EXIT_INPUT,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Input { .. } => "input",
            CliError::Format { .. } => "format",
            CliError::Io { .. } => "io",
            CliError::Stage { .. } => "stage",
            CliError::Usage(_) => "usage",
        }
    }
}

/// Machine-readable failure record written as `error.json`.
#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct ErrorRecord {
    pub status: String,
    pub kind: String,
    pub exit_code: i32,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
    /// Artifacts already written before the failure; they may be stale or incomplete.
    pub partial_artifacts: Vec<String>,
}

impl ErrorRecord {
    pub fn new(err: &CliError, partial_artifacts: Vec<String>) -> Self {
        let mut rec = ErrorRecord {
            status: "failed".into(),
            kind: err.kind().into(),
            exit_code: err.exit_code(),
            message: err.to_string(),
            stage: None,
            file: None,
            line: None,
            column: None,
            partial_artifacts,
        };
        match err {
            CliError::Input { file, line, column, .. } => {
                rec.file = Some(file.display().to_string());
                rec.line = Some(*line);
                rec.column = column.clone();
            }
            CliError::Format { path, .. } | CliError::Io { path, .. } => rec.file = Some(path.display().to_string()),
            CliError::Stage { stage, .. } => rec.stage = Some((*stage).into()),
            CliError::Usage(_) => {}
        }
        rec
    }
}
