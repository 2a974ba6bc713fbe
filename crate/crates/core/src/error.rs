use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("transcript is empty")]
    EmptyTranscript,

    #[error("lemmatizer unavailable: {0}")]
    LemmatizerUnavailable(String),

    #[error("vocabulary is empty")]
    EmptyVocabulary,

    #[error("embedding rows do not align with the corpus: {0}")]
    Alignment(String),

    #[error("malformed embeddings: {0}")]
    Format(String),

    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),

    #[error("too few documents: {units} modeled units for {topics} topics")]
    TooFewDocuments { units: usize, topics: usize },

    #[error("metric undefined: {0}")]
    MetricUndefined(&'static str),

    #[error("no topics: every unit was labeled as noise")]
    NoTopics,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Strips any stage tags and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
