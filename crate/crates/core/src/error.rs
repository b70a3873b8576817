use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// What went wrong while parsing a PGM byte stream.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PgmErrorKind {
    #[error("bad magic number (expected P2 or P5)")]
    BadMagic,
    #[error("expected an unsigned integer")]
    BadInteger,
    #[error("zero image dimension")]
    ZeroDimension,
    #[error("maxval {0} is outside 1..=255")]
    BadMaxval(u32),
    #[error("sample {value} exceeds maxval {maxval}")]
    SampleOutOfRange { value: u32, maxval: u32 },
    #[error("truncated data")]
    Truncated,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("pgm parse error at byte {offset}: {kind}")]
    Pgm { offset: usize, kind: PgmErrorKind },

    #[error("blank image")]
    BlankImage,

    #[error("ratio undefined: image has no background pixels")]
    RatioUndefined,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },

    #[error("unsupported model version {0}")]
    UnsupportedVersion(u64),

    #[error("model size inconsistency: {0}")]
    ModelSize(String),

    #[error("non-finite value in model field {0}")]
    NonFinite(String),

    #[error("model parse error: {0}")]
    ModelParse(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("{}: {err}", path.display())]
    Io { path: PathBuf, err: std::io::Error },
}

impl Error {
    pub(crate) fn pgm(offset: usize, kind: PgmErrorKind) -> Self {
        Error::Pgm { offset, kind }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, err: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            err,
        }
    }
}
