use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Column set or units do not match the configured gas schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// Structurally malformed input (empty file, non-monotone years, bad header).
    #[error("format error: {0}")]
    Format(String),

    /// Well-formed input with invalid values (NaN cell, negative GVA, ...).
    #[error("data error: {0}")]
    Data(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// A numerical operation left its domain (log of a non-positive concentration, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("sector '{0}' is not represented")]
    NotRepresented(String),

    #[error("sampler error: {0}")]
    Sampler(String),

    #[error("{failed} of {total} forward runs failed (limit {limit_pct}%)")]
    ForwardFailures {
        failed: usize,
        total: usize,
        limit_pct: f64,
    },

    #[error("training error: {0}")]
    Training(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
