use std::io::Write;

use rena_core::dataset::{read_jsonl, write_jsonl, LabeledExample, Origin};
use rena_core::schema::{Entity, EntityType, RelationTriple, RelationType};

fn example(i: usize) -> LabeledExample {
    let triples = (0..i % 4)
        .map(|k| {
            RelationTriple::new(
                Entity::new(EntityType::InfectiousDisease, &format!("disease {i}")).unwrap(),
                [RelationType::LocatedAt, RelationType::OccurredOn, RelationType::CasesOf][k % 3],
                Entity::new(
                    [EntityType::Location, EntityType::EventDate, EntityType::CaseNumber][k % 3],
                    &format!("value {i}.{k}"),
                )
                .unwrap(),
            )
        })
        .collect();
    let origin = if i % 2 == 0 { Origin::Synthetic } else { Origin::Curated };
    LabeledExample::new(format!("doc-{i}"), format!("Article number {i}."), triples, origin).unwrap()
}

#[test]
fn write_then_read_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.jsonl");
    let examples: Vec<_> = (0..10).map(example).collect();
    write_jsonl(&path, &examples).unwrap();
    let (back, issues) = read_jsonl(&path).unwrap();
    assert!(issues.is_empty());
    assert_eq!(back, examples);
}

#[test]
fn corrupt_line_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.jsonl");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "{}", serde_json::to_string(&example(1)).unwrap()).unwrap();
    writeln!(f, "{{\"doc_id\": \"broken\", ").unwrap();
    writeln!(f, "{}", serde_json::to_string(&example(2)).unwrap()).unwrap();
    drop(f);
    let (examples, issues) = read_jsonl(&path).unwrap();
    assert_eq!(examples.len(), 2);
    assert_eq!(issues.len(), 1);
    assert_eq!(issues[0].line, 2);
}

#[test]
fn schema_violation_line_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.jsonl");
    let bad = r#"{"doc_id":"x","article":"a","triples":[{"subject":{"type":"location","text":"Laos"},"relation":"caused_by","object":{"type":"pathogen","text":"H5N1"}}]}"#;
    std::fs::write(&path, format!("{bad}\n")).unwrap();
    let (examples, issues) = read_jsonl(&path).unwrap();
    assert!(examples.is_empty());
    assert!(issues[0].message.contains("not in the schema"), "{}", issues[0].message);
}

#[test]
fn empty_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.jsonl");
    std::fs::write(&path, "").unwrap();
    let (examples, issues) = read_jsonl(&path).unwrap();
    assert!(examples.is_empty() && issues.is_empty());
}

#[test]
fn missing_file_is_an_error() {
    assert!(read_jsonl(std::path::Path::new("/nonexistent/corpus.jsonl")).is_err());
}

#[test]
fn gold_format_without_origin_loads() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gold.jsonl");
    let line = r#"{"doc_id":"g1","article":"Ebola in Goma","triples":[{"subject":{"type":"infectious_disease","text":"Ebola"},"relation":"located_at","object":{"type":"location","text":"Goma"}}]}"#;
    std::fs::write(&path, format!("{line}\n")).unwrap();
    let (examples, issues) = read_jsonl(&path).unwrap();
    assert!(issues.is_empty());
    assert_eq!(examples[0].origin, Origin::Synthetic);
    assert_eq!(examples[0].triples.len(), 1);
}
