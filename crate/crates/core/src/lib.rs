//! Relation extraction from infectious-disease news articles.
//!
//! The pipeline renders a prompt for an article, sends it to a
//! text-generation backend, parses the numbered triple lines the model
//! returns, and locates the extracted entities in the article. Evaluation
//! and training-data tooling share the same schema and parser.

pub mod annotate;
pub mod client;
pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod parser;
pub mod pipeline;
pub mod prompting;
pub mod schema;

pub use annotate::{locate_entities, AnnotatedDocument, EntitySpan};
pub use client::{GenerationRequest, GenerationResponse, InferenceClient};
pub use config::{AppConfig, ModelKind, ModelSpec};
pub use evaluation::{evaluate_corpus, EvalReport, GoldDocument, Prf};
pub use parser::{parse_output, report_from_json, report_to_json, ParseReport, RawModelOutput};
pub use pipeline::{ExtractError, ExtractRequest, ExtractResponse, Pipeline};
pub use prompting::{render, template_digest, TemplateId};
pub use schema::{
    default_schema, Entity, EntityType, RelationSchema, RelationTriple, RelationType,
};
