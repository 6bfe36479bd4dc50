//! Entity highlighting: character spans of extracted entities in the
//! article, plus a fixed color per entity type.
//!
//! Offsets count Unicode scalar values (`char`s), not bytes.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::schema::{Entity, EntityType};

/// Color tokens in canonical entity-type order.
pub const PALETTE: [&str; 8] = [
    "red", "orange", "yellow", "green", "teal", "blue", "purple", "pink",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub entity: Entity,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedDocument {
    pub article: String,
    pub spans: Vec<EntitySpan>,
    pub unlocated: Vec<Entity>,
    pub colors: BTreeMap<EntityType, &'static str>,
}

pub fn color_of(etype: EntityType) -> &'static str {
    PALETTE[etype.index()]
}

pub fn color_map(types_present: &BTreeSet<EntityType>) -> BTreeMap<EntityType, &'static str> {
    types_present.iter().map(|t| (*t, color_of(*t))).collect()
}

/// Lowercased, whitespace-collapsed characters of `text`, each tagged with
/// the index of the source character it came from.
fn fold(text: &str) -> Vec<(char, usize)> {
    let mut out = Vec::with_capacity(text.len());
    let mut in_space = false;
    for (idx, c) in text.chars().enumerate() {
        if c.is_whitespace() {
            if !in_space {
                out.push((' ', idx));
                in_space = true;
            }
            continue;
        }
        in_space = false;
        for lc in c.to_lowercase() {
            out.push((lc, idx));
        }
    }
    out
}

/// Case-insensitive, whitespace-collapsed comparison key.
pub fn fold_key(text: &str) -> String {
    fold(text.trim()).into_iter().map(|(c, _)| c).collect()
}

/// Every occurrence of `needle` in the folded article, as char spans of
/// the original text. Matches must start and end on source-char
/// boundaries.
fn occurrences(folded: &[(char, usize)], needle: &[char]) -> Vec<(usize, usize)> {
    let mut found = Vec::new();
    if needle.is_empty() || needle.len() > folded.len() {
        return found;
    }
    for i in 0..=folded.len() - needle.len() {
        if (0..needle.len()).any(|k| folded[i + k].0 != needle[k]) {
            continue;
        }
        let j = i + needle.len() - 1;
        let starts_clean = i == 0 || folded[i - 1].1 != folded[i].1;
        let ends_clean = j + 1 == folded.len() || folded[j + 1].1 != folded[j].1;
        if starts_clean && ends_clean {
            found.push((folded[i].1, folded[j].1 + 1));
        }
    }
    found
}

/// Finds all occurrences of each distinct entity and keeps a
/// non-overlapping subset, preferring longer matches, then leftmost ones.
pub fn locate_entities(article: &str, entities: &[Entity]) -> AnnotatedDocument {
    let folded = fold(article);

    let mut distinct: Vec<&Entity> = Vec::new();
    let mut seen = HashSet::new();
    for e in entities {
        if seen.insert((e.etype, fold_key(&e.surface))) {
            distinct.push(e);
        }
    }

    // (start, end, entity index)
    let mut candidates: Vec<(usize, usize, usize)> = Vec::new();
    for (ei, e) in distinct.iter().enumerate() {
        let needle: Vec<char> = fold_key(&e.surface).chars().collect();
        for (s, t) in occurrences(&folded, &needle) {
            candidates.push((s, t, ei));
        }
    }
    candidates.sort_by(|a, b| {
        (b.1 - b.0)
            .cmp(&(a.1 - a.0))
            .then(a.0.cmp(&b.0))
            .then(distinct[a.2].etype.cmp(&distinct[b.2].etype))
            .then(a.2.cmp(&b.2))
    });

    let mut taken: Vec<(usize, usize, usize)> = Vec::new();
    for cand in candidates {
        if taken.iter().all(|t| cand.1 <= t.0 || t.1 <= cand.0) {
            taken.push(cand);
        }
    }
    taken.sort_by_key(|t| (t.0, t.1));

    let placed: HashSet<usize> = taken.iter().map(|t| t.2).collect();
    let spans = taken
        .into_iter()
        .map(|(start, end, ei)| EntitySpan {
            start,
            end,
            entity: distinct[ei].clone(),
        })
        .collect();
    let unlocated = distinct
        .iter()
        .enumerate()
        .filter(|(i, _)| !placed.contains(i))
        .map(|(_, e)| (*e).clone())
        .collect();
    let types: BTreeSet<EntityType> = distinct.iter().map(|e| e.etype).collect();

    AnnotatedDocument {
        article: article.to_string(),
        spans,
        unlocated,
        colors: color_map(&types),
    }
}

#[derive(Serialize, Deserialize)]
struct SpanJson {
    start: usize,
    end: usize,
    #[serde(rename = "type")]
    etype: EntityType,
    text: String,
}

#[derive(Serialize, Deserialize)]
struct DocumentJson {
    article: String,
    spans: Vec<SpanJson>,
    unlocated: Vec<Entity>,
    colors: BTreeMap<EntityType, String>,
}

impl AnnotatedDocument {
    /// `{"article", "spans": [{start, end, type, text}], "unlocated", "colors"}`
    pub fn to_json(&self) -> serde_json::Value {
        let doc = DocumentJson {
            article: self.article.clone(),
            spans: self
                .spans
                .iter()
                .map(|s| SpanJson {
                    start: s.start,
                    end: s.end,
                    etype: s.entity.etype,
                    text: s.entity.surface.clone(),
                })
                .collect(),
            unlocated: self.unlocated.clone(),
            colors: self
                .colors
                .iter()
                .map(|(t, c)| (*t, c.to_string()))
                .collect(),
        };
        serde_json::to_value(doc).expect("document serializes")
    }

    /// Checks the span invariants against the article: bounds, text match,
    /// ordering and disjointness.
    pub fn check_spans(&self) -> Result<(), String> {
        let chars: Vec<char> = self.article.chars().collect();
        let mut prev_end = 0;
        for (i, s) in self.spans.iter().enumerate() {
            if !(s.start < s.end && s.end <= chars.len()) {
                return Err(format!("span {i} [{}, {}) out of bounds", s.start, s.end));
            }
            if i > 0 && s.start < prev_end {
                return Err(format!("span {i} overlaps or is out of order"));
            }
            let slice: String = chars[s.start..s.end].iter().collect();
            if fold_key(&slice) != fold_key(&s.entity.surface) {
                return Err(format!(
                    "span {i} text {slice:?} does not match {:?}",
                    s.entity.surface
                ));
            }
            prev_end = s.end;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ent(t: EntityType, s: &str) -> Entity {
        Entity::new(t, s).unwrap()
    }

    fn spans(doc: &AnnotatedDocument) -> Vec<(usize, usize)> {
        doc.spans.iter().map(|s| (s.start, s.end)).collect()
    }

    #[test]
    fn simple_location() {
        let doc = locate_entities(
            "Ebola outbreak in Congo",
            &[ent(EntityType::Location, "Congo")],
        );
        assert_eq!(spans(&doc), vec![(18, 23)]);
        assert!(doc.unlocated.is_empty());
        doc.check_spans().unwrap();
    }

    #[test]
    fn case_insensitive() {
        let doc = locate_entities(
            "covid-19 cases rise",
            &[ent(EntityType::InfectiousDisease, "COVID-19")],
        );
        assert_eq!(spans(&doc), vec![(0, 8)]);
    }

    #[test]
    fn missing_entity_is_unlocated() {
        let e = ent(EntityType::Location, "Kinshasa");
        let doc = locate_entities("Ebola outbreak in Congo", &[e.clone()]);
        assert!(doc.spans.is_empty());
        assert_eq!(doc.unlocated, vec![e]);
    }

    #[test]
    fn all_occurrences_highlighted() {
        let doc = locate_entities(
            "Laos and laos and LAOS",
            &[ent(EntityType::Location, "Laos")],
        );
        assert_eq!(spans(&doc), vec![(0, 4), (9, 13), (18, 22)]);
    }

    #[test]
    fn longest_match_wins_overlap() {
        let article = "cases of avian influenza (HPAI) virus (H5N1) and later H5N1 again";
        let doc = locate_entities(
            article,
            &[
                ent(EntityType::Pathogen, "H5N1"),
                ent(EntityType::InfectiousDisease, "avian influenza (HPAI) virus (H5N1)"),
            ],
        );
        assert_eq!(spans(&doc), vec![(9, 44), (55, 59)]);
        assert_eq!(doc.spans[0].entity.etype, EntityType::InfectiousDisease);
        assert_eq!(doc.spans[1].entity.etype, EntityType::Pathogen);
        doc.check_spans().unwrap();
    }

    #[test]
    fn leftmost_wins_equal_length() {
        let doc = locate_entities("aaa", &[ent(EntityType::Location, "aa")]);
        assert_eq!(spans(&doc), vec![(0, 2)]);
    }

    #[test]
    fn whitespace_collapsed() {
        let doc = locate_entities(
            "in Saravane\n  province today",
            &[ent(EntityType::Location, "saravane province")],
        );
        assert_eq!(spans(&doc), vec![(3, 22)]);
        doc.check_spans().unwrap();
    }

    #[test]
    fn code_point_offsets() {
        // "é" and "ü" are two bytes each; "日本" three bytes each
        let article = "Épidémie à Zürich, 日本: Ebola";
        let doc = locate_entities(article, &[ent(EntityType::InfectiousDisease, "ebola")]);
        let start = article.chars().count() - 5;
        assert_eq!(spans(&doc), vec![(start, start + 5)]);
        assert_ne!(start, article.find("Ebola").unwrap());
        doc.check_spans().unwrap();
    }

    #[test]
    fn lowercase_expansion_keeps_boundaries() {
        // 'İ' lowercases to two chars; a match must not split it
        let doc = locate_entities("İzmir", &[ent(EntityType::Location, "zmir")]);
        assert_eq!(spans(&doc), vec![(1, 5)]);
        let doc = locate_entities("İzmir", &[ent(EntityType::Location, "\u{307}zmir")]);
        assert!(doc.spans.is_empty());
    }

    #[test]
    fn duplicate_entities_collapse() {
        let doc = locate_entities(
            "Goma",
            &[ent(EntityType::Location, "Goma"), ent(EntityType::Location, "GOMA")],
        );
        assert_eq!(doc.spans.len(), 1);
        assert!(doc.unlocated.is_empty());
    }

    #[test]
    fn colors() {
        let one = color_map(&BTreeSet::from([EntityType::InfectiousDisease]));
        assert_eq!(one[&EntityType::InfectiousDisease], PALETTE[0]);
        let all: BTreeSet<_> = EntityType::ALL.into_iter().collect();
        let map = color_map(&all);
        let tokens: BTreeSet<_> = map.values().collect();
        assert_eq!(tokens.len(), 8);
        assert_eq!(map, color_map(&all));
    }

    #[test]
    fn json_shape() {
        let doc = locate_entities(
            "Ebola outbreak in Congo",
            &[ent(EntityType::Location, "Congo")],
        );
        let v = doc.to_json();
        assert_eq!(
            serde_json::to_string(&v).unwrap(),
            r#"{"article":"Ebola outbreak in Congo","spans":[{"start":18,"end":23,"type":"location","text":"Congo"}],"unlocated":[],"colors":{"location":"green"}}"#
        );
    }

    #[test]
    fn idempotent() {
        let ents = [
            ent(EntityType::Pathogen, "H5N1"),
            ent(EntityType::Location, "Laos"),
        ];
        let a = locate_entities("H5N1 in Laos; Laos H5N1", &ents);
        let b = locate_entities(&a.article, &ents);
        assert_eq!(a, b);
    }
}
