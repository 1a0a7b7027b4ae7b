use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error category, used by the CLI to pick an exit code and a
/// machine-parsable tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Asset,
    Parse,
    Integrity,
    Alignment,
    Model,
    Numeric,
    Precondition,
    Memory,
}

impl ErrorCategory {
    pub fn tag(self) -> &'static str {
        match self {
            ErrorCategory::Asset => "asset",
            ErrorCategory::Parse => "parse",
            ErrorCategory::Integrity => "integrity",
            ErrorCategory::Alignment => "alignment",
            ErrorCategory::Model => "model",
            ErrorCategory::Numeric => "numeric",
            ErrorCategory::Precondition => "precondition",
            ErrorCategory::Memory => "memory",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: line {line}: {message}")]
    Parse {
        context: String,
        line: usize,
        message: String,
    },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("cannot align word {word_index} ({word:?}): {reason}")]
    Alignment {
        word_index: usize,
        word: String,
        reason: String,
    },

    #[error("missing tensor {0:?}")]
    MissingTensor(String),

    #[error("tensor {name:?}: expected shape {expected:?}, found {found:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("invalid model config: {0}")]
    Config(String),

    #[error("sequence length {len} outside [{min}, {max}]")]
    SequenceLength { len: usize, min: usize, max: usize },

    #[error("{what} {index} out of range (expected {range})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        range: String,
    },

    #[error("degenerate predictor {0:?}: zero variance")]
    DegeneratePredictor(String),

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("undefined similarity: zero-norm vector")]
    ZeroVector,

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("write rejected: store is sealed")]
    SealedStore,

    #[error("schema error in {context}: {message}")]
    Schema { context: String, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(context: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            line,
            message: message.into(),
        }
    }

    pub fn schema(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            context: context.into(),
            message: message.into(),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Io { .. } => ErrorCategory::Asset,
            Error::Parse { .. } | Error::Schema { .. } => ErrorCategory::Parse,
            Error::Integrity(_) => ErrorCategory::Integrity,
            Error::Alignment { .. } => ErrorCategory::Alignment,
            Error::MissingTensor(_)
            | Error::ShapeMismatch { .. }
            | Error::Config(_)
            | Error::SequenceLength { .. } => ErrorCategory::Model,
            Error::DegeneratePredictor(_)
            | Error::SingularDesign(_)
            | Error::ZeroVector
            | Error::DimensionMismatch(..) => ErrorCategory::Numeric,
            Error::OutOfRange { .. } | Error::Precondition(_) => ErrorCategory::Precondition,
            Error::SealedStore => ErrorCategory::Memory,
        }
    }
}
