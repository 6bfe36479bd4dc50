//! Turns numbered completion lines such as
//!
//! ```text
//! 1) "infectious disease": "H5N1", "relation": "located at", "location": "Laos"
//! ```
//!
//! into validated [`RelationTriple`]s, keeping a diagnostic for every line
//! that did not make it.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::LineError;
use crate::schema::{
    Entity, EntityType, RelationSchema, RelationTriple, RelationType, ValidationMode, Verdict,
};

/// Completion text exactly as the backend returned it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawModelOutput {
    pub text: String,
    pub model_id: String,
}

impl RawModelOutput {
    pub fn new(text: impl Into<String>, model_id: impl Into<String>) -> Self {
        RawModelOutput {
            text: text.into(),
            model_id: model_id.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Reject lines that would otherwise only produce a warning
    /// (reversed direction, duplicates).
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LineOutcome {
    Triple {
        triple: RelationTriple,
        /// The line named the entities object-first; `triple` has been
        /// put back into the schema's declared direction.
        reversed: bool,
    },
    Filler,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub line: usize,
    pub text: String,
    pub reason: LineError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warning {
    pub line: usize,
    pub note: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseReport {
    pub triples: Vec<RelationTriple>,
    pub rejected: Vec<Rejection>,
    pub warnings: Vec<Warning>,
    /// 1-based numbers of blank or prose lines.
    pub filler: Vec<usize>,
}

impl ParseReport {
    pub fn line_count(&self) -> usize {
        self.triples.len() + self.rejected.len() + self.filler.len()
    }
}

const QUOTE_LIKE: [char; 6] = ['\u{201C}', '\u{201D}', '\u{201E}', '\u{201F}', '\u{2033}', '\u{FF02}'];

fn unify_quotes(line: &str) -> String {
    line.chars()
        .map(|c| if QUOTE_LIKE.contains(&c) { '"' } else { c })
        .collect()
}

/// Strips a leading `N)` or `N.` index. Returns the remainder and whether
/// an index was present.
fn strip_index(s: &str) -> (&str, bool) {
    let digits = s.bytes().take_while(u8::is_ascii_digit).count();
    if digits > 0 {
        let rest = &s[digits..];
        if let Some(rest) = rest.strip_prefix(')').or_else(|| rest.strip_prefix('.')) {
            return (rest.trim_start(), true);
        }
    }
    (s, false)
}

fn looks_like_triple(body: &str, indexed: bool) -> bool {
    body.starts_with('"')
        || body.contains("\":")
        || (indexed && body.to_lowercase().contains("relation"))
}

/// True when `rest` (text after a closing quote) ends the pair list.
fn is_line_end(rest: &str) -> bool {
    let rest = rest.trim_start();
    let rest = rest
        .strip_prefix([',', '.', ';'])
        .unwrap_or(rest);
    rest.trim().is_empty()
}

/// True when `rest` begins with `, "key":`.
fn starts_next_pair(rest: &str) -> bool {
    let Some(rest) = rest.trim_start().strip_prefix(',') else {
        return false;
    };
    let Some(rest) = rest.trim_start().strip_prefix('"') else {
        return false;
    };
    match rest.find('"') {
        Some(end) => rest[end + 1..].trim_start().starts_with(':'),
        None => false,
    }
}

fn malformed(msg: impl Into<String>) -> LineError {
    LineError::MalformedLine(msg.into())
}

/// Splits `"k": "v", "k": "v", ...` into pairs. A value runs up to the
/// first quote that is followed by either the end of the line or another
/// quoted key, so commas and quotes inside values survive.
fn scan_pairs(body: &str) -> Result<Vec<(String, String)>, LineError> {
    let mut pairs = Vec::new();
    let mut rest = body.trim();
    loop {
        let after_open = rest
            .strip_prefix('"')
            .ok_or_else(|| malformed("expected a quoted key"))?;
        let key_end = after_open
            .find('"')
            .ok_or_else(|| malformed("unterminated key"))?;
        let key = &after_open[..key_end];
        let after_key = after_open[key_end + 1..].trim_start();
        let after_colon = after_key
            .strip_prefix(':')
            .ok_or_else(|| malformed(format!("missing ':' after key {key:?}")))?
            .trim_start();
        let value_src = after_colon
            .strip_prefix('"')
            .ok_or_else(|| malformed(format!("value for key {key:?} is not quoted")))?;

        let mut close = None;
        let mut ends_line = false;
        for (i, _) in value_src.match_indices('"') {
            let tail = &value_src[i + 1..];
            if is_line_end(tail) {
                close = Some(i);
                ends_line = true;
                break;
            }
            if starts_next_pair(tail) {
                close = Some(i);
                break;
            }
        }
        let close = close.ok_or_else(|| malformed(format!("unterminated value for key {key:?}")))?;
        pairs.push((key.to_string(), value_src[..close].to_string()));
        if ends_line {
            return Ok(pairs);
        }
        // starts_next_pair guaranteed a comma then a quote
        rest = value_src[close + 1..].trim_start()[1..].trim_start();
    }
}

/// Parses one completion line.
///
/// Blank lines and prose yield [`LineOutcome::Filler`]. Triples are
/// validated symmetrically and returned in the schema's declared direction.
pub fn parse_line(line: &str, schema: &RelationSchema) -> Result<LineOutcome, LineError> {
    let unified = unify_quotes(line);
    let (body, indexed) = strip_index(unified.trim());
    if body.is_empty() || !looks_like_triple(body, indexed) {
        return Ok(LineOutcome::Filler);
    }
    let pairs = scan_pairs(body)?;
    if pairs.len() != 3 {
        return Err(malformed(format!(
            "expected 3 key/value pairs, found {}",
            pairs.len()
        )));
    }
    let is_relation = |k: &str| k.trim().eq_ignore_ascii_case("relation");
    let relation_count = pairs.iter().filter(|(k, _)| is_relation(k)).count();
    if relation_count != 1 {
        return Err(malformed(format!(
            "expected exactly one \"relation\" key, found {relation_count}"
        )));
    }

    let mut relation = None;
    let mut entities = Vec::with_capacity(2);
    for (key, value) in &pairs {
        if is_relation(key) {
            relation = Some(RelationType::from_surface(value)?);
        } else {
            let etype = EntityType::from_key(key)?;
            entities.push(Entity::new(etype, value)?);
        }
    }
    let relation = relation.expect("exactly one relation key");
    let object = entities.pop().expect("two entities");
    let subject = entities.pop().expect("two entities");
    let triple = RelationTriple::new(subject, relation, object);

    match schema.validate(&triple, ValidationMode::Symmetric) {
        Verdict::Valid { reversed: false } => Ok(LineOutcome::Triple {
            triple,
            reversed: false,
        }),
        Verdict::Valid { reversed: true } => Ok(LineOutcome::Triple {
            triple: triple.reversed(),
            reversed: true,
        }),
        Verdict::Invalid(reason) => Err(LineError::SchemaViolation(reason)),
    }
}

/// Parses a whole completion. Never fails: every problem lands in the report.
pub fn parse_output(raw: &RawModelOutput, schema: &RelationSchema) -> ParseReport {
    parse_output_with(raw, schema, ParseOptions::default())
}

pub fn parse_output_with(
    raw: &RawModelOutput,
    schema: &RelationSchema,
    options: ParseOptions,
) -> ParseReport {
    let mut report = ParseReport::default();
    let mut seen: HashSet<RelationTriple> = HashSet::new();

    for (idx, line) in raw.text.lines().enumerate() {
        let line_no = idx + 1;
        let reject = |report: &mut ParseReport, reason: LineError| {
            report.rejected.push(Rejection {
                line: line_no,
                text: line.to_string(),
                reason,
            })
        };
        match parse_line(line, schema) {
            Ok(LineOutcome::Filler) => report.filler.push(line_no),
            Err(e) => reject(&mut report, e),
            Ok(LineOutcome::Triple { triple, reversed }) => {
                let mut notes = Vec::new();
                if reversed {
                    notes.push(format!(
                        "entities given object-first; reordered to ({}, {}, {})",
                        triple.subject.etype, triple.relation, triple.object.etype
                    ));
                }
                if seen.contains(&triple) {
                    notes.push("duplicate of an earlier triple".to_string());
                }
                if options.strict && !notes.is_empty() {
                    reject(&mut report, LineError::SchemaViolation(notes.join("; ")));
                    continue;
                }
                for note in notes {
                    report.warnings.push(Warning {
                        line: line_no,
                        note,
                    });
                }
                seen.insert(triple.clone());
                report.triples.push(triple);
            }
        }
    }
    report
}

#[derive(Serialize, Deserialize)]
struct RejectionJson {
    line: usize,
    text: String,
    reason: String,
    detail: String,
}

#[derive(Serialize, Deserialize)]
struct ReportJson {
    relations: Vec<RelationTriple>,
    #[serde(default)]
    rejected: Vec<RejectionJson>,
    #[serde(default)]
    warnings: Vec<Warning>,
}

fn line_error_detail(e: &LineError) -> &str {
    match e {
        LineError::MalformedLine(s)
        | LineError::UnknownEntityKey(s)
        | LineError::UnknownRelation(s)
        | LineError::SchemaViolation(s) => s,
    }
}

fn line_error_from_parts(code: &str, detail: String) -> Option<LineError> {
    Some(match code {
        "malformed_line" => LineError::MalformedLine(detail),
        "unknown_entity_key" => LineError::UnknownEntityKey(detail),
        "unknown_relation" => LineError::UnknownRelation(detail),
        "schema_violation" => LineError::SchemaViolation(detail),
        _ => return None,
    })
}

/// Serializes a report as `{"relations": [...], "rejected": [...], "warnings": [...]}`.
pub fn report_to_json(report: &ParseReport) -> serde_json::Value {
    let doc = ReportJson {
        relations: report.triples.clone(),
        rejected: report
            .rejected
            .iter()
            .map(|r| RejectionJson {
                line: r.line,
                text: r.text.clone(),
                reason: r.reason.code().to_string(),
                detail: line_error_detail(&r.reason).to_string(),
            })
            .collect(),
        warnings: report.warnings.clone(),
    };
    serde_json::to_value(doc).expect("report serializes")
}

/// Inverse of [`report_to_json`]. Filler line numbers are not serialized
/// and come back empty.
pub fn report_from_json(value: &serde_json::Value) -> Result<ParseReport, serde_json::Error> {
    let doc: ReportJson = serde_json::from_value(value.clone())?;
    let mut rejected = Vec::with_capacity(doc.rejected.len());
    for r in doc.rejected {
        let reason = line_error_from_parts(&r.reason, r.detail).ok_or_else(|| {
            serde::de::Error::custom(format!("unknown rejection reason {:?}", r.reason))
        })?;
        rejected.push(Rejection {
            line: r.line,
            text: r.text,
            reason,
        });
    }
    Ok(ParseReport {
        triples: doc.relations,
        rejected,
        warnings: doc.warnings,
        filler: Vec::new(),
    })
}
