use thiserror::Error;

/// Error type shared by all core modules.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument or configuration value is out of range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two objects built for different class counts were combined.
    #[error("class count mismatch: expected {expected}, got {got}")]
    ClassMismatch { expected: usize, got: usize },

    /// A checkpoint field failed validation.
    #[error("checkpoint field `{field}`: {reason}")]
    Checkpoint { field: String, reason: String },

    /// The checkpoint format version is not supported.
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    /// A computation produced NaN or infinity.
    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// The file is not valid JSON of the expected shape.
    #[error("malformed file: {0}")]
    Malformed(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
