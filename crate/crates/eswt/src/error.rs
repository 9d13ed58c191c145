use std::path::PathBuf;

/// Errors of the I/O layer and the commands built on it.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {detail}")]
    Format { path: PathBuf, detail: String },
    #[error("config {path}: {field}: {detail}")]
    Config { path: PathBuf, field: String, detail: String },
    #[error("checkpoint does not fit the model:\n  {}", .0.join("\n  "))]
    Mismatch(Vec<String>),
    #[error("{0}")]
    Usage(String),
    #[error("non-finite loss at iteration {iter}; last checkpoint: {}", last_checkpoint.as_ref().map_or("none".into(), |p| p.display().to_string()))]
    Diverged { iter: usize, last_checkpoint: Option<PathBuf> },
    #[error(transparent)]
    Core(#[from] eswt_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Format { path: path.into(), detail: detail.into() }
    }

    /// Process exit status: 3 for a diverged run, 2 for bad input of any
    /// kind, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        use eswt_core::Error as C;
        match self {
            Error::Diverged { .. } | Error::Core(C::NonFiniteLoss { .. }) | Error::Core(C::NonFinite { .. }) => 3,
            Error::Io { .. } => 1,
            Error::Core(C::Callback(_)) => 1,
            _ => 2,
        }
    }
}
