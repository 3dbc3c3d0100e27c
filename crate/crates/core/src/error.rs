use thiserror::Error;

/// Errors raised anywhere in the extraction and training pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported record: {0}")]
    UnsupportedRecord(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("insufficient beats: found {found}, need at least {needed}")]
    InsufficientBeats { found: usize, needed: usize },

    #[error("label {0} skipped: no positive examples in the training split")]
    SkippedLabel(String),

    #[error("importance prior does not match the feature manifest (prior {prior}, current {current})")]
    PriorMismatch { prior: String, current: String },

    #[error("manifest mismatch: model expects {expected}, data has {found}")]
    ManifestMismatch { expected: String, found: String },

    #[error("pipeline error: {0}")]
    Pipeline(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
