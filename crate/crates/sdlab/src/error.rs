use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] sdlab_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    /// Process exit code reported by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core(sdlab_core::Error::SingularRow(_)) => crate::EXIT_NON_CONVERGENCE,
            _ => crate::EXIT_CONFIG,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
