use std::path::PathBuf;

/// Errors of the IO layer and command-line front end.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] echodiff_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Wav {
        path: PathBuf,
        source: hound::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error(transparent)]
    Weights(#[from] WeightFileError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid data: {0}")]
    Data(String),
}

/// Failures reading a weight file, one variant per kind of damage.
#[derive(Debug, thiserror::Error)]
pub enum WeightFileError {
    #[error("not a weight file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported weight file version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("tensor `{second}` overlaps tensor `{first}` in the payload")]
    OffsetOverlap { first: String, second: String },
    #[error("truncated file: need {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("{0} unreferenced bytes after the last tensor")]
    TrailingBytes(u64),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure category, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Divergence,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Divergence => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ErrorKind::Config => "config",
            ErrorKind::Data => "data",
            ErrorKind::Divergence => "divergence",
        }
    }
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use echodiff_core::Error as C;
        match self {
            Error::Config(_) | Error::Core(C::Config(_)) => ErrorKind::Config,
            Error::Core(C::Divergence { .. } | C::NonFinite { .. }) => ErrorKind::Divergence,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json { path: path.into(), source }
    }
}
