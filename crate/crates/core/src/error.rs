use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors produced by the core algorithms.
///
/// Variants are grouped by what went wrong rather than by module, so callers
/// can map them onto coarse categories (configuration, data, numerics).
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("numeric divergence in {what} at {unit} {index}")]
    Divergence {
        what: &'static str,
        unit: &'static str,
        index: usize,
    },
    #[error("missing weight tensor `{0}`")]
    MissingTensor(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
