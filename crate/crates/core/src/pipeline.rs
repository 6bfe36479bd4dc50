//! Article in, three views out: raw completion, parsed relations and the
//! highlighted article. Both the CLI and the HTTP service go through
//! [`Pipeline::extract`].

use std::collections::HashSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::annotate::{locate_entities, AnnotatedDocument};
use crate::client::{GenerationRequest, InferenceClient};
use crate::config::{AppConfig, Limits};
use crate::error::ClientError;
use crate::parser::{parse_output_with, report_to_json, ParseOptions, ParseReport};
use crate::prompting::render;
use crate::schema::{default_schema, Entity, RelationSchema};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractRequest {
    pub article: String,
    pub model: String,
    pub max_tokens: u32,
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("{0}")]
    InvalidRequest(String),
    #[error("article is {size} bytes, limit is {limit}")]
    TooLarge { size: usize, limit: usize },
    #[error("unknown model {0:?}")]
    UnknownModel(String),
    #[error("backend timed out: {0}")]
    Timeout(ClientError),
    #[error("backend failure: {0}")]
    Backend(ClientError),
}

impl From<ClientError> for ExtractError {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::UnknownModel(id) => ExtractError::UnknownModel(id),
            ClientError::InvalidRequest(m) => ExtractError::InvalidRequest(m),
            e @ ClientError::Timeout { .. } => ExtractError::Timeout(e),
            e => ExtractError::Backend(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractResponse {
    pub raw: String,
    pub relations: ParseReport,
    pub annotated: AnnotatedDocument,
    pub timing_ms: u64,
}

/// Distinct entities of the accepted triples, in order of first mention.
pub fn entity_table(report: &ParseReport) -> Vec<Entity> {
    let mut seen = HashSet::new();
    report
        .triples
        .iter()
        .flat_map(|t| [&t.subject, &t.object])
        .filter(|e| seen.insert((e.etype, e.surface.as_str())))
        .cloned()
        .collect()
}

impl ExtractResponse {
    pub fn relations_json(&self) -> Value {
        report_to_json(&self.relations)
    }

    pub fn to_json(&self) -> Value {
        let entities: Vec<Value> = entity_table(&self.relations)
            .iter()
            .map(|e| json!({"text": e.surface, "type": e.etype}))
            .collect();
        let relations: Vec<Value> = self
            .relations
            .triples
            .iter()
            .map(|t| {
                json!({
                    "subject": t.subject.surface,
                    "relation": t.relation,
                    "object": t.object.surface,
                })
            })
            .collect();
        json!({
            "raw": self.raw,
            "relations": self.relations_json(),
            "annotated": self.annotated.to_json(),
            "entity_table": entities,
            "relation_table": relations,
            "timing_ms": self.timing_ms,
        })
    }
}

#[derive(Clone)]
pub struct Pipeline {
    client: InferenceClient,
    schema: RelationSchema,
    limits: Limits,
    options: ParseOptions,
}

impl Pipeline {
    pub fn new(client: InferenceClient, schema: RelationSchema, limits: Limits) -> Self {
        Pipeline {
            client,
            schema,
            limits,
            options: ParseOptions::default(),
        }
    }

    pub fn from_config(config: &AppConfig) -> Self {
        Pipeline::new(InferenceClient::from_config(config), default_schema(), config.limits)
    }

    pub fn with_options(mut self, options: ParseOptions) -> Self {
        self.options = options;
        self
    }

    pub fn with_schema(mut self, schema: RelationSchema) -> Self {
        self.schema = schema;
        self
    }

    pub fn client(&self) -> &InferenceClient {
        &self.client
    }

    pub fn limits(&self) -> Limits {
        self.limits
    }

    pub fn validate(&self, req: &ExtractRequest) -> Result<(), ExtractError> {
        if req.article.len() > self.limits.max_article_bytes {
            return Err(ExtractError::TooLarge {
                size: req.article.len(),
                limit: self.limits.max_article_bytes,
            });
        }
        if req.article.trim().is_empty() {
            return Err(ExtractError::InvalidRequest("article is empty".into()));
        }
        if req.max_tokens == 0 || req.max_tokens > self.limits.max_tokens {
            return Err(ExtractError::InvalidRequest(format!(
                "max_tokens must be between 1 and {}",
                self.limits.max_tokens
            )));
        }
        Ok(())
    }

    pub fn extract(&self, req: &ExtractRequest) -> Result<ExtractResponse, ExtractError> {
        let started = Instant::now();
        self.validate(req)?;
        let spec = self.client.model(&req.model)?;
        let prompt = render(spec.template, Some(&req.article))
            .map_err(|e| ExtractError::InvalidRequest(format!("model {:?}: {e}", spec.id)))?;
        let mut gen = GenerationRequest::new(&spec.id, prompt, req.max_tokens);
        gen.temperature = self.client.default_temperature();
        let generated = self.client.generate(&gen)?;

        let relations = parse_output_with(&generated.raw, &self.schema, self.options);
        let annotated = locate_entities(&req.article, &entity_table(&relations));
        Ok(ExtractResponse {
            raw: generated.raw.text,
            relations,
            annotated,
            timing_ms: started.elapsed().as_millis() as u64,
        })
    }
}
