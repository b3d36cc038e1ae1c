use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by front ends to pick exit codes and message prefixes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Io,
    Format,
    Integrity,
    Domain,
    Mismatch,
}

impl ErrorCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Io => "io",
            ErrorCategory::Format => "format",
            ErrorCategory::Integrity => "integrity",
            ErrorCategory::Domain => "domain",
            ErrorCategory::Mismatch => "mismatch",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },

    #[error("malformed container at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("truncated data for tensor `{name}`: need {expected} bytes, found {actual}")]
    Truncated {
        name: String,
        expected: u64,
        actual: u64,
    },

    #[error("integrity violation: {0}")]
    Integrity(String),

    #[error("{0}")]
    Domain(String),

    #[error("tensor `{key}` differs between checkpoints: {detail}")]
    Mismatch { key: String, detail: String },

    #[error("image is {width}x{height} but {kind} needs at least {min}x{min} pixels")]
    DegenerateInput {
        kind: &'static str,
        width: u32,
        height: u32,
        min: u32,
    },

    #[error("invalid JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Io { .. } => ErrorCategory::Io,
            Error::Format { .. } | Error::Json { .. } | Error::Image(_) => ErrorCategory::Format,
            Error::Truncated { .. } | Error::Integrity(_) => ErrorCategory::Integrity,
            Error::Domain(_) | Error::DegenerateInput { .. } => ErrorCategory::Domain,
            Error::Mismatch { .. } => ErrorCategory::Mismatch,
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
