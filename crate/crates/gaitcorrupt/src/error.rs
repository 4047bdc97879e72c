use std::io;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Image { path: PathBuf, source: image::ImageError },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Core { path: PathBuf, source: gaitcorrupt_core::Error },
    #[error(transparent)]
    Engine(#[from] gaitcorrupt_core::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("refusing to merge reports: {0}")]
    RefusesToMerge(String),
    #[error("usage: {0}")]
    Usage(String),
}

pub type Result<T, E = IoError> = std::result::Result<T, E>;

impl IoError {
    pub fn io(path: &Path) -> impl FnOnce(io::Error) -> IoError + '_ {
        move |source| IoError::Io { path: path.to_path_buf(), source }
    }

    pub fn format(path: &Path, message: impl Into<String>) -> IoError {
        IoError::Format { path: path.to_path_buf(), message: message.into() }
    }

    pub fn core(path: &Path) -> impl FnOnce(gaitcorrupt_core::Error) -> IoError + '_ {
        move |source| IoError::Core { path: path.to_path_buf(), source }
    }

    /// Process exit status for this error: 2 for configuration and usage problems, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            IoError::Config(_) | IoError::Usage(_) | IoError::RefusesToMerge(_) => 2,
            _ => 1,
        }
    }
}
