use std::path::PathBuf;

use crate::corpus::CorpusKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("expected a {expected} corpus, got {found}")]
    KindMismatch {
        expected: CorpusKind,
        found: CorpusKind,
    },

    #[error("invalid sentence at line {line}: {reason}")]
    InvalidSentence { line: usize, reason: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("corpus has {available} entries but {requested} were requested")]
    InsufficientData { requested: usize, available: usize },

    #[error("missing resource: {0}")]
    MissingResource(String),

    #[error("feature names do not match: {0}")]
    FeatureMismatch(String),

    #[error("model configurations differ: {0}")]
    ModelMismatch(String),

    #[error("translator returned {got} sentences for {expected} inputs")]
    TranslatorCount { expected: usize, got: usize },

    #[error("refusing to tag a corpus that is not purely synthetic (provenance: {0})")]
    NotSynthetic(String),

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("stage `{stage}`: {field}: {reason}")]
    Config {
        stage: String,
        field: String,
        reason: String,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("external translator: {0}")]
    Translator(String),

    #[error("output directory is locked by another run: {0}")]
    Locked(PathBuf),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl AsRef<std::path::Path>, line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            path: path.as_ref().display().to_string(),
            line,
            reason: reason.into(),
        }
    }
}
