use std::path::PathBuf;

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on a value was violated.
    #[error("domain error: {0}")]
    Domain(String),

    /// Tensor or activation shapes do not line up.
    #[error("shape error: {0}")]
    Shape(String),

    /// Two feature streams cannot be aligned in time.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// A rank correlation is undefined (constant ranking or too few items).
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    /// An LLM answer did not match any known verdict pattern.
    #[error("unparseable validation answer: {raw:?}")]
    AnswerParse { raw: String },

    /// Configuration inconsistency (unknown task, bad hyperparameter, ...).
    #[error("config error: {0}")]
    Config(String),

    /// A manifest line failed to parse or validate.
    #[error("manifest error at line {line}: {msg}")]
    Manifest { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid file format: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("tensor backend error: {0}")]
    Backend(#[from] candle_core::Error),

    #[error("midi error: {0}")]
    Midi(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
