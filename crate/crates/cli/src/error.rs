use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = LabError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("{path}: {message}")]
    Config { path: String, message: String },
    #[error("unknown preset `{0}` (see list-presets)")]
    UnknownPreset(String),
    #[error("bad override `{0}`: expected key=value")]
    BadOverride(String),
    #[error("{context}: {source}")]
    Engine {
        context: String,
        #[source]
        source: mcf_core::Error,
    },
    #[error("checkpoint version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt checkpoint: {0}")]
    CorruptSnapshot(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization failed: {0}")]
    Serialize(String),
}

impl LabError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config { path: path.into(), message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }
}

/// Attaches run context to engine errors.
pub(crate) trait EngineContext<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T>;
}

impl<T> EngineContext<T> for mcf_core::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|source| LabError::Engine { context: what(), source })
    }
}
