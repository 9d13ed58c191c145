use alloc::string::String;

/// Errors raised by the core crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape error in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("unsupported kernel size {0} (expected 1 or 3)")]
    UnsupportedKernel(usize),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite values produced by {layer}")]
    NonFinite { layer: String },
    #[error("non-finite loss at iteration {iter}")]
    NonFiniteLoss { iter: usize },
    #[error("gradient check failed: {0}")]
    GradCheck(String),
    #[error("dataset error: {0}")]
    Data(String),
    #[error("training callback failed: {0}")]
    Callback(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape { op, detail: detail.into() }
    }
}
