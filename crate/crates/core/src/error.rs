use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("duplicate sample id `{0}`")]
    DuplicateSampleId(String),

    #[error("dataset `{dataset}` labels class `{class}` which it does not declare as annotated")]
    UndeclaredClass { dataset: String, class: String },

    #[error("dataset `{dataset}`, sample `{sample_id}`, class `{class}`: label value {value} is not 0 or 1")]
    InvalidLabelValue {
        dataset: String,
        sample_id: String,
        class: String,
        value: i64,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("class axis mismatch: expected `{expected}`, found `{found}`")]
    ClassAxisMismatch { expected: String, found: String },

    #[error("unknown class `{0}`")]
    UnknownClass(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("every class was skipped (no annotated labels)")]
    AllClassesSkipped,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("class `{0}` has no displayed samples and cannot be balanced")]
    Unbalanceable(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl AsRef<std::path::Path>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.as_ref().display().to_string(),
            line,
            message: message.into(),
        }
    }

    /// True for failures of the underlying filesystem rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
