use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Config(String),

    #[error("empty result: {0}")]
    Empty(String),

    #[error("encoding: {0}")]
    Encoding(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("scheduling: {0}")]
    Scheduling(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-parsable category, stable across versions.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Config(_) => "config",
            Error::Empty(_) => "empty",
            Error::Encoding(_) => "encoding",
            Error::Dimension(_) => "dimension",
            Error::Fit(_) => "fit",
            Error::UndefinedMetric(_) => "metric",
            Error::Scheduling(_) => "scheduling",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line() as usize).unwrap_or(0);
        Error::Parse {
            line,
            message: err.to_string(),
        }
    }
}
