//! Work behind the CLI subcommands, kept out of `main` so tests can reach it.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rena_core::dataset::{read_jsonl, LabeledExample, LineIssue};
use rena_core::{report_from_json, AnnotatedDocument, AppConfig, GoldDocument, ParseReport};
use serde_json::Value;

/// A failed command and the exit status it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad input, flags or files: exit 1.
    Validation(String),
    /// The model backend failed or timed out: exit 2.
    Backend(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Backend(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Backend(m) => m,
        }
    }
}

pub fn invalid(message: impl std::fmt::Display) -> Failure {
    Failure::Validation(message.to_string())
}

/// Config from `path`, or the built-in registry, with endpoint overrides
/// from the environment applied.
pub fn load_config(path: Option<&Path>) -> Result<AppConfig, Failure> {
    let config = match path {
        Some(p) => AppConfig::load(p).map_err(invalid)?,
        None => AppConfig::default(),
    };
    Ok(config.with_process_env())
}

/// The article with every located span wrapped as `[text](type)`.
pub fn render_annotated(doc: &AnnotatedDocument) -> String {
    let chars: Vec<char> = doc.article.chars().collect();
    let mut out = String::with_capacity(doc.article.len() + 16 * doc.spans.len());
    let mut at = 0;
    for span in &doc.spans {
        out.extend(&chars[at..span.start]);
        out.push('[');
        out.extend(&chars[span.start..span.end]);
        out.push_str("](");
        out.push_str(span.entity.etype.canonical_name());
        out.push(')');
        at = span.end;
    }
    out.extend(&chars[at..]);
    out
}

/// Gold documents, one JSON object per line. Blank lines are skipped.
pub fn read_gold(path: &Path) -> Result<Vec<GoldDocument>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let mut docs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: GoldDocument = serde_json::from_str(line)
            .map_err(|e| invalid(format!("{}:{}: {e}", path.display(), i + 1)))?;
        docs.push(doc);
    }
    Ok(docs)
}

/// Predicted reports, one parse-report JSON object per line, each with an
/// optional `doc_id`.
pub fn read_predictions(path: &Path) -> Result<Vec<(Option<String>, ParseReport)>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let mut preds = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at = |e: serde_json::Error| invalid(format!("{}:{}: {e}", path.display(), i + 1));
        let value: Value = serde_json::from_str(line).map_err(at)?;
        let doc_id = value.get("doc_id").and_then(Value::as_str).map(str::to_string);
        preds.push((doc_id, report_from_json(&value).map_err(at)?));
    }
    Ok(preds)
}

/// Pairs predictions with gold documents: by `doc_id` when every
/// prediction carries one, otherwise by line order.
pub fn align(
    gold: Vec<GoldDocument>,
    preds: Vec<(Option<String>, ParseReport)>,
) -> Result<Vec<(GoldDocument, ParseReport)>, Failure> {
    if !preds.is_empty() && preds.iter().all(|(id, _)| id.is_some()) {
        let mut by_id: HashMap<String, ParseReport> = HashMap::new();
        for (id, report) in preds {
            let id = id.expect("checked above");
            if by_id.insert(id.clone(), report).is_some() {
                return Err(invalid(format!("duplicate prediction for doc_id {id:?}")));
            }
        }
        let mut pairs = Vec::with_capacity(gold.len());
        for doc in gold {
            // a document without a prediction counts as an empty prediction
            let report = by_id.remove(&doc.doc_id).unwrap_or_default();
            pairs.push((doc, report));
        }
        if let Some(extra) = by_id.keys().next() {
            return Err(invalid(format!("prediction for unknown doc_id {extra:?}")));
        }
        return Ok(pairs);
    }
    if gold.len() != preds.len() {
        return Err(invalid(format!(
            "{} gold documents but {} predictions",
            gold.len(),
            preds.len()
        )));
    }
    Ok(gold.into_iter().zip(preds.into_iter().map(|(_, r)| r)).collect())
}

/// Reads a labeled corpus; any bad line fails the whole read.
pub fn read_corpus(path: &Path) -> Result<Vec<LabeledExample>, Failure> {
    let (examples, issues) = read_jsonl(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    if issues.is_empty() {
        return Ok(examples);
    }
    Err(invalid(describe_issues(path, &issues)))
}

fn describe_issues(path: &Path, issues: &[LineIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("{}:{}: {}", path.display(), i.line, i.message))
        .collect::<Vec<_>>()
        .join("\n")
}
