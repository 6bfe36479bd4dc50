//! Python bindings. Structured values cross the boundary as JSON strings in
//! the same shapes the HTTP API uses.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rena_core::dataset::{self, LabeledExample};
use rena_core::parser::{parse_output_with, ParseOptions};
use rena_core::{
    evaluation, report_from_json, AppConfig, Entity, ExtractError, ExtractRequest, GoldDocument, Pipeline,
    RawModelOutput, RelationSchema, TemplateId,
};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn schema(extension: bool) -> RelationSchema {
    if extension {
        RelationSchema::with_extension()
    } else {
        rena_core::default_schema()
    }
}

fn template(name: &str) -> PyResult<TemplateId> {
    name.parse().map_err(value_error)
}

/// Entity types, aliases and allowed relation pairs as JSON.
#[pyfunction]
#[pyo3(signature = (extension = false))]
fn schema_json(extension: bool) -> String {
    schema(extension).to_json().to_string()
}

/// Parses raw model text into a report JSON `{"relations", "rejected", "warnings"}`.
#[pyfunction]
#[pyo3(signature = (text, extension = false, strict = false))]
fn parse_output(text: &str, extension: bool, strict: bool) -> String {
    let raw = RawModelOutput::new(text, "python");
    let report = parse_output_with(&raw, &schema(extension), ParseOptions { strict });
    rena_core::report_to_json(&report).to_string()
}

/// Renders a template; returns `(system, user)`.
#[pyfunction]
#[pyo3(signature = (name, article = None))]
fn render(name: &str, article: Option<&str>) -> PyResult<(Option<String>, String)> {
    let prompt = rena_core::render(template(name)?, article).map_err(value_error)?;
    Ok((prompt.system, prompt.user))
}

#[pyfunction]
fn template_digest(name: &str) -> PyResult<String> {
    Ok(rena_core::template_digest(template(name)?))
}

/// `entities` is a JSON list of `{"type", "text"}`; returns the annotated document JSON.
#[pyfunction]
fn locate_entities(article: &str, entities: &str) -> PyResult<String> {
    let entities: Vec<Entity> = serde_json::from_str(entities).map_err(value_error)?;
    Ok(rena_core::locate_entities(article, &entities).to_json().to_string())
}

#[pyfunction]
fn f1(precision: f64, recall: f64) -> f64 {
    evaluation::f1(precision, recall)
}

/// `gold` is a JSON list of gold documents, `predictions` a JSON list of
/// reports in the same order. Returns the evaluation report JSON.
#[pyfunction]
fn evaluate(gold: &str, predictions: &str) -> PyResult<String> {
    let gold: Vec<GoldDocument> = serde_json::from_str(gold).map_err(value_error)?;
    let preds: Vec<serde_json::Value> = serde_json::from_str(predictions).map_err(value_error)?;
    if gold.len() != preds.len() {
        return Err(value_error(format!("{} gold documents but {} predictions", gold.len(), preds.len())));
    }
    let mut docs = Vec::with_capacity(gold.len());
    for (g, p) in gold.into_iter().zip(&preds) {
        docs.push((g, report_from_json(p).map_err(value_error)?));
    }
    let report = rena_core::evaluate_corpus(&docs).map_err(value_error)?;
    Ok(serde_json::to_string(&report).expect("report serializes"))
}

/// Prompt and completion for one labeled example given as JSON.
#[pyfunction]
fn training_record(example: &str) -> PyResult<(String, String)> {
    let ex: LabeledExample = serde_json::from_str(example).map_err(value_error)?;
    let record = dataset::to_training_record(&ex).map_err(value_error)?;
    Ok((record.prompt, record.completion))
}

/// Indices of a deterministic train/validation split of `n` items.
#[pyfunction]
#[pyo3(signature = (n, val_fraction = 0.01, seed = 42))]
fn split(n: usize, val_fraction: f64, seed: u64) -> PyResult<(Vec<usize>, Vec<usize>)> {
    let indices: Vec<usize> = (0..n).collect();
    dataset::split(&indices, val_fraction, seed).map_err(value_error)
}

/// Fine-tuning config as YAML.
#[pyfunction]
fn emit_finetune_config(base_model: &str) -> String {
    dataset::emit_finetune_config(base_model).to_yaml()
}

/// The extraction pipeline over a model registry.
#[pyclass(frozen)]
struct Extractor {
    pipeline: Pipeline,
}

#[pymethods]
impl Extractor {
    /// `config` is TOML text; the built-in registry is used when absent.
    #[new]
    #[pyo3(signature = (config = None))]
    fn new(config: Option<&str>) -> PyResult<Self> {
        let config = match config {
            Some(text) => AppConfig::from_toml_str(text).map_err(value_error)?,
            None => AppConfig::default(),
        };
        Ok(Extractor {
            pipeline: Pipeline::from_config(&config.with_process_env()),
        })
    }

    /// `[(id, display_name)]`
    fn models(&self) -> Vec<(String, String)> {
        self.pipeline
            .client()
            .list_models()
            .iter()
            .map(|m| (m.id.clone(), m.display_name.clone()))
            .collect()
    }

    /// Runs the pipeline and returns the full response JSON. Backend
    /// failures raise `RuntimeError`, bad requests `ValueError`.
    fn extract(&self, py: Python<'_>, article: &str, model: &str, max_tokens: u32) -> PyResult<String> {
        let req = ExtractRequest {
            article: article.to_string(),
            model: model.to_string(),
            max_tokens,
        };
        let result = py.detach(|| self.pipeline.extract(&req));
        match result {
            Ok(resp) => Ok(resp.to_json().to_string()),
            Err(e @ (ExtractError::Backend(_) | ExtractError::Timeout(_))) => Err(PyRuntimeError::new_err(e.to_string())),
            Err(e) => Err(value_error(e)),
        }
    }
}

#[pymodule]
fn rena(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(schema_json, m)?)?;
    m.add_function(wrap_pyfunction!(parse_output, m)?)?;
    m.add_function(wrap_pyfunction!(render, m)?)?;
    m.add_function(wrap_pyfunction!(template_digest, m)?)?;
    m.add_function(wrap_pyfunction!(locate_entities, m)?)?;
    m.add_function(wrap_pyfunction!(f1, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(training_record, m)?)?;
    m.add_function(wrap_pyfunction!(split, m)?)?;
    m.add_function(wrap_pyfunction!(emit_finetune_config, m)?)?;
    m.add_class::<Extractor>()?;
    Ok(())
}
