use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("unknown entity key {0:?}")]
    UnknownEntityKey(String),
    #[error("unknown relation {0:?}")]
    UnknownRelation(String),
    #[error("entity surface is empty")]
    EmptySurface,
}

/// Why a single completion line could not become a triple.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LineError {
    #[error("malformed line: {0}")]
    MalformedLine(String),
    #[error("unknown entity key {0:?}")]
    UnknownEntityKey(String),
    #[error("unknown relation {0:?}")]
    UnknownRelation(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
}

impl LineError {
    /// Stable snake_case code used in JSON reports.
    pub fn code(&self) -> &'static str {
        match self {
            LineError::MalformedLine(_) => "malformed_line",
            LineError::UnknownEntityKey(_) => "unknown_entity_key",
            LineError::UnknownRelation(_) => "unknown_relation",
            LineError::SchemaViolation(_) => "schema_violation",
        }
    }
}

impl From<SchemaError> for LineError {
    fn from(e: SchemaError) -> Self {
        match e {
            SchemaError::UnknownEntityKey(k) => LineError::UnknownEntityKey(k),
            SchemaError::UnknownRelation(r) => LineError::UnknownRelation(r),
            SchemaError::EmptySurface => LineError::MalformedLine("empty entity value".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("template {0:?} requires an article")]
    MissingArticle(String),
    #[error("template {0:?} does not take an article")]
    UnexpectedArticle(String),
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("unknown model {0:?}")]
    UnknownModel(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend unreachable after {attempts} attempt(s): {detail}")]
    BackendUnreachable { attempts: u32, detail: String },
    #[error("backend returned HTTP {status}: {body}")]
    BackendError { status: u16, body: String },
    #[error("backend timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("duplicate document id {0:?}")]
    DuplicateDocId(String),
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("validation failure: {0}")]
    ValidationFailure(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
