use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("backward on an empty tape")]
    EmptyTape,

    #[error("NaN gradient in parameter `{0}`; step aborted")]
    NanGradient(String),

    #[error("data error{}: {msg}", row.map(|r| format!(" (row {r})")).unwrap_or_default())]
    Data { row: Option<usize>, msg: String },

    #[error("weight file: bad magic")]
    BadMagic,

    #[error("weight file: unsupported version {0}")]
    UnsupportedVersion(u32),

    #[error("weight file: config hash mismatch (file {file:#018x}, expected {expected:#018x})")]
    ConfigHashMismatch { file: u64, expected: u64 },

    #[error("weight file: truncated payload ({0})")]
    TruncatedPayload(String),

    #[error("weight file: checksum failure (stored {stored:#018x}, computed {computed:#018x})")]
    ChecksumMismatch { stored: u64, computed: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::ShapeMismatch { op, detail: detail.into() }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data { row: None, msg: msg.into() }
    }

    pub fn data_row(row: usize, msg: impl Into<String>) -> Self {
        Error::Data { row: Some(row), msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
