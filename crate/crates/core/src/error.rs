use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("i/o error: {0}")]
    Stream(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("not found: {0}")]
    NotFound(String),

    /// The embedding provider could not produce a vector (for example a
    /// remote endpoint is down). Pairs hitting this are reported as unscored.
    #[error("scoring unavailable: {0}")]
    ScoringUnavailable(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("embedding cache corrupt: {0}")]
    CacheCorrupt(String),

    #[error("evaluation error: no breakdown for {} labeled pair(s): {}", .0.len(), format_pairs(.0))]
    MissingBreakdowns(Vec<(String, String)>),

    #[error("invalid input: {0}")]
    Invalid(String),
}

fn format_pairs(pairs: &[(String, String)]) -> String {
    pairs
        .iter()
        .map(|(a, b)| format!("({a}, {b})"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
