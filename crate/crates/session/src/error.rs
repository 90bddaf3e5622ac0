use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("log schema version {found} is not supported (expected {expected})")]
    Version { found: u64, expected: u64 },

    #[error("log line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("input at t={t} s is before the session clock ({now} s)")]
    InputOrder { t: f64, now: f64 },

    #[error("session state: {0}")]
    State(String),

    #[error("contrast: {0}")]
    Contrast(String),

    #[error(transparent)]
    Core(#[from] slowbeat_core::Error),

    #[error(transparent)]
    Analysis(#[from] slowbeat_analysis::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
