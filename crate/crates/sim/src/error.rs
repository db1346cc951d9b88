// SPDX-License-Identifier: Apache-2.0

use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("missing checkpoint for agent {agent}: {path}")]
    MissingCheckpoint { agent: String, path: PathBuf },
    #[error(transparent)]
    Core(#[from] v2n_core::Error),
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
}

impl SimError {
    pub fn io(path: &Path) -> impl FnOnce(io::Error) -> SimError + '_ {
        move |source| SimError::Io { path: path.to_path_buf(), source }
    }

    pub fn csv(path: &Path) -> impl FnOnce(csv::Error) -> SimError + '_ {
        move |source| SimError::Csv { path: path.to_path_buf(), source }
    }

    pub fn json(path: &Path) -> impl FnOnce(serde_json::Error) -> SimError + '_ {
        move |source| SimError::Json { path: path.to_path_buf(), source }
    }

    pub fn format(path: &Path, message: impl Into<String>) -> SimError {
        SimError::Format { path: path.to_path_buf(), message: message.into() }
    }

    /// Stable machine-readable kind.
    pub fn kind(&self) -> &'static str {
        match self {
            SimError::Io { .. } => "io",
            SimError::Csv { .. } => "csv",
            SimError::Json { .. } => "json",
            SimError::Format { .. } => "format",
            SimError::Config(_) => "config",
            SimError::MissingCheckpoint { .. } => "missing_checkpoint",
            SimError::Core(v2n_core::Error::Budget { .. }) => "budget",
            SimError::Core(v2n_core::Error::Divergence { .. }) => "divergence",
            SimError::Core(_) => "model",
        }
    }

    /// One-line JSON object for stderr.
    pub fn to_json(&self) -> String {
        let report = ErrorReport { error: self.kind(), message: self.to_string() };
        serde_json::to_string(&report).expect("plain strings serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let e = SimError::Core(v2n_core::Error::Budget { required: 1e9, budget: 1e7 });
        let v: serde_json::Value = serde_json::from_str(&e.to_json()).unwrap();
        assert_eq!(v["error"], "budget");
        assert!(v["message"].as_str().unwrap().contains("exceeds budget"));
    }
}
