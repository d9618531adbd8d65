use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("orbit diverged at step {step}: component {component} = {value}")]
    Divergence {
        step: u64,
        component: usize,
        value: f64,
    },

    #[error("orbit diverged at step {step} before any point was retained")]
    EmptyOrbit { step: u64 },

    #[error("dimension fit failed: {0}")]
    Fit(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("syntax error at line {line}, column {column}: {message}")]
    ConfigSyntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config key `{key}`{}: {reason}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    ConfigKey {
        key: String,
        line: Option<usize>,
        reason: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors that mean the orbit escaped to infinity.
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Divergence { .. } | Error::EmptyOrbit { .. })
    }
}
