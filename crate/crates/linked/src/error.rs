use std::path::PathBuf;

use linked_core::{ConfigError, LevelError, MetricsError, PrepError, PromptError, ScoreError};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}:{line}: duplicate question id {id}")]
    DuplicateId { path: PathBuf, line: usize, id: String },
    #[error("{path}:{line}: {source}")]
    Invalid {
        path: PathBuf,
        line: usize,
        #[source]
        source: linked_core::ModelError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl DataError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DataError::Io { path: path.into(), source }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("invalid chat request: {0}")]
    InvalidRequest(String),
    #[error("network error after {attempts} attempts: {message}")]
    Network { attempts: u32, message: String },
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("backend returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    Malformed(String),
    #[error("mock backend has no question {0}")]
    UnknownQuestion(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// Failure of one pipeline stage, with the stage name and question context.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("configuration: {0}")]
    Setup(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{stage}: question {qid}: {source}")]
    Gateway {
        stage: &'static str,
        qid: String,
        #[source]
        source: GatewayError,
    },
    #[error("elicit: question {qid}: no usable knowledge after regeneration")]
    ElicitationFailure { qid: String },
    #[error("label: {0}")]
    Level(#[from] LevelError),
    #[error("score: {0}")]
    Score(#[from] ScoreError),
    #[error("prep: {0}")]
    Prep(#[from] PrepError),
    #[error("eval: {0}")]
    Metrics(#[from] MetricsError),
    #[error("{stage}: question {qid}: {message}")]
    Stage { stage: &'static str, qid: String, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
