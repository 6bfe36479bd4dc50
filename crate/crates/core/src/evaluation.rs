//! NER and RE precision/recall/F1 against gold annotations.
//!
//! Entities are compared as sets of (type, normalized surface). Relation
//! scoring only considers gold triples whose two entities were both
//! recognised, and predicted triples over recognised entities.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::EvalError;
use crate::parser::ParseReport;
use crate::schema::{EntityType, RelationTriple, RelationType};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldDocument {
    pub doc_id: String,
    pub article: String,
    #[serde(rename = "triples")]
    pub gold_triples: Vec<RelationTriple>,
}

/// Normalized entity identity used for matching.
pub type EntityKey = (EntityType, String);

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Prf {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Prf {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        Prf {
            precision,
            recall,
            f1: f1(precision, recall),
            tp,
            fp,
            fn_,
        }
    }

    fn add(self, other: Prf) -> Prf {
        Prf::from_counts(self.tp + other.tp, self.fp + other.fp, self.fn_ + other.fn_)
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn is_edge_punct(c: char) -> bool {
    matches!(
        c,
        '.' | ',' | ';' | ':' | '!' | '?' | '"' | '\'' | '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}'
    )
}

/// Casefold, collapse whitespace, and strip surrounding punctuation and quotes.
pub fn normalize_surface(s: &str) -> String {
    let collapsed = s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    collapsed
        .trim_matches(|c: char| is_edge_punct(c) || c.is_whitespace())
        .to_string()
}

pub fn entity_key(etype: EntityType, surface: &str) -> EntityKey {
    (etype, normalize_surface(surface))
}

/// Distinct entities mentioned by a list of triples.
pub fn entity_set(triples: &[RelationTriple]) -> BTreeSet<EntityKey> {
    triples
        .iter()
        .flat_map(|t| [&t.subject, &t.object])
        .map(|e| entity_key(e.etype, &e.surface))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntityMatching {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    /// Gold keys that a prediction matched (identical to the predicted key).
    pub matched: BTreeSet<EntityKey>,
}

pub fn match_entities(gold: &BTreeSet<EntityKey>, pred: &BTreeSet<EntityKey>) -> EntityMatching {
    let matched: BTreeSet<EntityKey> = gold.intersection(pred).cloned().collect();
    let tp = matched.len() as u64;
    EntityMatching {
        tp,
        fp: pred.len() as u64 - tp,
        fn_: gold.len() as u64 - tp,
        matched,
    }
}

/// Direction-insensitive triple identity.
type TripleKey = (RelationType, EntityKey, EntityKey);

fn triple_key(t: &RelationTriple) -> TripleKey {
    let a = entity_key(t.subject.etype, &t.subject.surface);
    let b = entity_key(t.object.etype, &t.object.surface);
    if a <= b {
        (t.relation, a, b)
    } else {
        (t.relation, b, a)
    }
}

pub fn score_re(
    gold_triples: &[RelationTriple],
    pred_triples: &[RelationTriple],
    matching: &EntityMatching,
) -> Prf {
    let recognised = |k: &TripleKey| matching.matched.contains(&k.1) && matching.matched.contains(&k.2);
    let gold: HashSet<TripleKey> = gold_triples.iter().map(triple_key).filter(recognised).collect();
    let pred: HashSet<TripleKey> = pred_triples.iter().map(triple_key).filter(recognised).collect();
    let tp = gold.intersection(&pred).count() as u64;
    Prf::from_counts(tp, pred.len() as u64 - tp, gold.len() as u64 - tp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocScore {
    pub doc_id: String,
    pub ner: Prf,
    #[serde(rename = "re")]
    pub re_: Prf,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ner: Prf,
    #[serde(rename = "re")]
    pub re_: Prf,
    pub per_doc: Vec<DocScore>,
}

pub fn score_document(gold: &GoldDocument, pred: &[RelationTriple]) -> DocScore {
    let matching = match_entities(&entity_set(&gold.gold_triples), &entity_set(pred));
    let re_ = score_re(&gold.gold_triples, pred, &matching);
    DocScore {
        doc_id: gold.doc_id.clone(),
        ner: Prf::from_counts(matching.tp, matching.fp, matching.fn_),
        re_,
    }
}

/// Per-document scores plus micro-averaged corpus scores.
pub fn evaluate_corpus(docs: &[(GoldDocument, ParseReport)]) -> Result<EvalReport, EvalError> {
    let mut ids = HashSet::new();
    for (gold, _) in docs {
        if !ids.insert(gold.doc_id.as_str()) {
            return Err(EvalError::DuplicateDocId(gold.doc_id.clone()));
        }
    }
    let per_doc: Vec<DocScore> = docs
        .iter()
        .map(|(gold, report)| score_document(gold, &report.triples))
        .collect();
    let (ner, re_) = per_doc
        .iter()
        .fold((Prf::default(), Prf::default()), |(n, r), d| (n.add(d.ner), r.add(d.re_)));
    Ok(EvalReport { ner, re_, per_doc })
}

impl EvalReport {
    /// Aligned text table with the columns Model, Eval, Precision, Recall, F1.
    pub fn to_table(&self, model: &str) -> String {
        let header = ["Model", "Eval", "Precision", "Recall", "F1"];
        let rows = [("NER", self.ner), ("RE", self.re_)];
        let width = model.len().max(header[0].len());
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:<4}  {:>9}  {:>6}  {:>4}",
            header[0], header[1], header[2], header[3], header[4]
        );
        for (eval, prf) in rows {
            let _ = writeln!(
                out,
                "{:<width$}  {:<4}  {:>9.2}  {:>6.2}  {:>4.2}",
                model, eval, prf.precision, prf.recall, prf.f1
            );
        }
        out
    }
}
