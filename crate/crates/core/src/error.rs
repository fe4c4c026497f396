use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("singular system: matrix is rank deficient even after ridge regularization")]
    SingularSystem,

    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("value out of range at row {row}: {message}")]
    Range { row: usize, message: String },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("empty partition: {0}")]
    EmptyPartition(&'static str),
    #[error("too few rows ({n}) for a train/validation/test split")]
    TooFewRows { n: usize },
    #[error("index {0} appears in more than one partition")]
    Overlap(usize),
    #[error("index {0} is missing from or out of range for the partition")]
    Coverage(usize),

    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("training diverged: non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("spread must be positive, got {0}")]
    NonPositiveSpread(f64),
    #[error("smoothing factor must be positive, got {0}")]
    NonPositiveSigma(f64),

    #[error("targets have zero variance; correlation is undefined")]
    DegenerateTargets,

    #[error("unknown variety label {0:?}")]
    Vocabulary(String),
    #[error("unsupported model format version {0}")]
    Version(u32),
    #[error("model file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by malformed user input (flags, files, values)
    /// rather than failures while computing.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Schema(_)
                | Error::Parse { .. }
                | Error::Range { .. }
                | Error::Config(_)
                | Error::Vocabulary(_)
                | Error::Version(_)
                | Error::Json(_)
        )
    }
}
