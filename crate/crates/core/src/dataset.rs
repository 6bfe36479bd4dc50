//! Training-data tooling: labeled examples, instruction/response records,
//! train/validation split and the QLoRA trainer config.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::DatasetError;
use crate::prompting::{render, TemplateId};
use crate::schema::{Entity, RelationSchema, RelationTriple, ValidationMode, Verdict};

/// Completion used for an article with no relations.
pub const NO_RELATIONS: &str = "No relations found.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    #[default]
    Synthetic,
    Curated,
}

/// An article with its labeled triples. Construct through
/// [`LabeledExample::new`], which validates and orients every triple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    #[serde(default)]
    pub doc_id: String,
    pub article: String,
    pub triples: Vec<RelationTriple>,
    #[serde(default)]
    pub origin: Origin,
}

/// Schema used for training data: the default pairs plus the
/// deaths-of-host extension.
pub fn training_schema() -> RelationSchema {
    RelationSchema::with_extension()
}

fn check_surface(e: &Entity) -> Result<(), DatasetError> {
    let bad = |why: &str| {
        Err(DatasetError::ValidationFailure(format!(
            "{} {:?}: {why}",
            e.etype, e.surface
        )))
    };
    if e.surface.trim().is_empty() {
        return bad("empty surface");
    }
    if e.surface.trim() != e.surface {
        return bad("surrounding whitespace");
    }
    if e
        .surface
        .chars()
        .any(|c| matches!(c, '"' | '\n' | '\r' | '\u{201C}'..='\u{201F}' | '\u{2033}' | '\u{FF02}'))
    {
        return bad("quotes and line breaks cannot be written to a completion line");
    }
    Ok(())
}

impl LabeledExample {
    /// Validates triples against the training schema (symmetric mode) and
    /// stores reversed ones in the declared direction.
    pub fn new(
        doc_id: impl Into<String>,
        article: impl Into<String>,
        triples: Vec<RelationTriple>,
        origin: Origin,
    ) -> Result<LabeledExample, DatasetError> {
        let schema = training_schema();
        let mut oriented = Vec::with_capacity(triples.len());
        for t in triples {
            check_surface(&t.subject)?;
            check_surface(&t.object)?;
            match schema.validate(&t, ValidationMode::Symmetric) {
                Verdict::Valid { reversed: false } => oriented.push(t),
                Verdict::Valid { reversed: true } => oriented.push(t.reversed()),
                Verdict::Invalid(why) => return Err(DatasetError::ValidationFailure(why)),
            }
        }
        Ok(LabeledExample {
            doc_id: doc_id.into(),
            article: article.into(),
            triples: oriented,
            origin,
        })
    }

    /// Re-runs validation on an example built from deserialized fields.
    pub fn validated(self) -> Result<LabeledExample, DatasetError> {
        LabeledExample::new(self.doc_id, self.article, self.triples, self.origin)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub prompt: String,
    pub completion: String,
}

/// One completion line in the numbered key/value grammar.
pub fn completion_line(index: usize, t: &RelationTriple) -> String {
    format!(
        "{index}) \"{}\": \"{}\", \"relation\": \"{}\", \"{}\": \"{}\"",
        t.subject.etype.output_key(),
        t.subject.surface,
        t.relation.surface(),
        t.object.etype.output_key(),
        t.object.surface
    )
}

pub fn serialize_completion(triples: &[RelationTriple]) -> String {
    if triples.is_empty() {
        return NO_RELATIONS.to_string();
    }
    triples
        .iter()
        .enumerate()
        .map(|(i, t)| completion_line(i + 1, t))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn to_training_record(example: &LabeledExample) -> Result<TrainingRecord, DatasetError> {
    let example = example.clone().validated()?;
    let prompt = render(TemplateId::Inference, Some(&example.article))
        .expect("inference template takes an article");
    Ok(TrainingRecord {
        prompt: prompt.user,
        completion: serialize_completion(&example.triples),
    })
}

/// Deterministic shuffle-and-split. The validation side gets
/// `ceil(n × val_fraction)` items; both sides keep their input order.
pub fn split<T: Clone>(
    examples: &[T],
    val_fraction: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>), DatasetError> {
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(DatasetError::ValidationFailure(format!(
            "val_fraction must be in [0, 1), got {val_fraction}"
        )));
    }
    let n = examples.len();
    // tolerance absorbs float noise such as 0.07 * 100 = 7.000000000000001
    let n_val = ((n as f64 * val_fraction - 1e-9).ceil().max(0.0) as usize).min(n);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_val = vec![false; n];
    for &i in &order[..n_val] {
        is_val[i] = true;
    }
    let (mut train, mut val) = (Vec::with_capacity(n - n_val), Vec::with_capacity(n_val));
    for (i, ex) in examples.iter().enumerate() {
        if is_val[i] {
            val.push(ex.clone());
        } else {
            train.push(ex.clone());
        }
    }
    Ok((train, val))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineIssue {
    pub line: usize,
    pub message: String,
}

/// Reads a JSONL corpus. Bad lines are collected, not fatal; blank lines
/// are skipped.
pub fn read_jsonl(path: &Path) -> Result<(Vec<LabeledExample>, Vec<LineIssue>), DatasetError> {
    let reader = BufReader::new(File::open(path)?);
    let mut examples = Vec::new();
    let mut issues = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<LabeledExample>(&line)
            .map_err(DatasetError::from)
            .and_then(LabeledExample::validated);
        match parsed {
            Ok(ex) => examples.push(ex),
            Err(e) => issues.push(LineIssue {
                line: i + 1,
                message: e.to_string(),
            }),
        }
    }
    Ok((examples, issues))
}

pub fn write_jsonl(path: &Path, examples: &[LabeledExample]) -> Result<(), DatasetError> {
    let checked = examples
        .iter()
        .map(|e| e.clone().validated())
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = BufWriter::new(File::create(path)?);
    for ex in &checked {
        serde_json::to_writer(&mut out, ex)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Writes any serializable rows as JSON lines.
pub fn write_jsonl_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), DatasetError> {
    let mut out = BufWriter::new(File::create(path)?);
    for row in rows {
        serde_json::to_writer(&mut out, row)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecialTokens {
    pub bos_token: String,
    pub eos_token: String,
    pub unk_token: String,
}

/// QLoRA fine-tuning settings used for both 13B models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    pub base_model: String,
    pub model_type: String,
    pub tokenizer_type: String,
    pub is_llama_derived_model: bool,
    pub load_in_8bit: bool,
    pub load_in_4bit: bool,
    pub strict: bool,
    pub val_set_size: f64,
    pub adapter: String,
    pub sequence_len: u32,
    pub sample_packing: bool,
    pub pad_to_sequence_len: bool,
    pub lora_r: u32,
    pub lora_alpha: u32,
    pub lora_dropout: f64,
    pub lora_target_linear: bool,
    pub gradient_accumulation_steps: u32,
    pub micro_batch_size: u32,
    pub num_epochs: u32,
    pub optimizer: String,
    pub lr_scheduler: String,
    pub learning_rate: f64,
    pub train_on_inputs: bool,
    pub group_by_length: bool,
    pub bf16: bool,
    pub fp16: bool,
    pub tf32: bool,
    pub gradient_checkpointing: bool,
    pub logging_steps: u32,
    pub flash_attention: bool,
    pub warmup_steps: u32,
    pub eval_steps: u32,
    pub weight_decay: f64,
    pub special_tokens: SpecialTokens,
}

/// Keys of the trainer config, excluding `base_model`, in emission order.
pub const FINETUNE_KEYS: [&str; 33] = [
    "model_type",
    "tokenizer_type",
    "is_llama_derived_model",
    "load_in_8bit",
    "load_in_4bit",
    "strict",
    "val_set_size",
    "adapter",
    "sequence_len",
    "sample_packing",
    "pad_to_sequence_len",
    "lora_r",
    "lora_alpha",
    "lora_dropout",
    "lora_target_linear",
    "gradient_accumulation_steps",
    "micro_batch_size",
    "num_epochs",
    "optimizer",
    "lr_scheduler",
    "learning_rate",
    "train_on_inputs",
    "group_by_length",
    "bf16",
    "fp16",
    "tf32",
    "gradient_checkpointing",
    "logging_steps",
    "flash_attention",
    "warmup_steps",
    "eval_steps",
    "weight_decay",
    "special_tokens",
];

pub fn emit_finetune_config(base_model_id: &str) -> FinetuneConfig {
    FinetuneConfig {
        base_model: base_model_id.to_string(),
        model_type: "LlamaForCausalLM".into(),
        tokenizer_type: "LlamaTokenizer".into(),
        is_llama_derived_model: true,
        load_in_8bit: false,
        load_in_4bit: true,
        strict: false,
        val_set_size: 0.01,
        adapter: "qlora".into(),
        sequence_len: 4096,
        sample_packing: true,
        pad_to_sequence_len: true,
        lora_r: 64,
        lora_alpha: 32,
        lora_dropout: 0.05,
        lora_target_linear: true,
        gradient_accumulation_steps: 4,
        micro_batch_size: 1,
        num_epochs: 3,
        optimizer: "paged_adamw_32bit".into(),
        lr_scheduler: "cosine".into(),
        learning_rate: 0.0002,
        train_on_inputs: false,
        group_by_length: false,
        bf16: false,
        fp16: true,
        tf32: false,
        gradient_checkpointing: true,
        logging_steps: 1,
        flash_attention: false,
        warmup_steps: 10,
        eval_steps: 20,
        weight_decay: 0.0,
        special_tokens: SpecialTokens {
            bos_token: "<s>".into(),
            eos_token: "</s>".into(),
            unk_token: "<unk>".into(),
        },
    }
}

fn yaml_scalar(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => {
            let plain = !s.is_empty()
                && s.chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | '/'))
                && !matches!(s.as_str(), "true" | "false" | "null" | "yes" | "no");
            if plain {
                s.clone()
            } else {
                serde_json::to_string(s).expect("string serializes")
            }
        }
        other => other.to_string(),
    }
}

impl FinetuneConfig {
    /// Axolotl-style YAML, keys in declaration order.
    pub fn to_yaml(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let mut out = String::new();
        for (key, v) in value.as_object().expect("struct is an object") {
            match v {
                serde_json::Value::Object(inner) => {
                    out.push_str(&format!("{key}:\n"));
                    for (k, v) in inner {
                        out.push_str(&format!("  {k}: {}\n", yaml_scalar(v)));
                    }
                }
                v => out.push_str(&format!("{key}: {}\n", yaml_scalar(v))),
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_output, RawModelOutput};
    use crate::schema::{EntityType, RelationType};

    fn ent(t: EntityType, s: &str) -> Entity {
        Entity::new(t, s).unwrap()
    }

    #[test]
    fn single_triple_completion() {
        let ex = LabeledExample::new(
            "d1",
            "India reports H1N1",
            vec![RelationTriple::new(
                ent(EntityType::InfectiousDisease, "H1N1"),
                RelationType::CasesOf,
                ent(EntityType::CaseNumber, "3,000"),
            )],
            Origin::Synthetic,
        )
        .unwrap();
        let rec = to_training_record(&ex).unwrap();
        assert_eq!(
            rec.completion,
            r#"1) "infectious disease": "H1N1", "relation": "cases of", "case numbers": "3,000""#
        );
        assert!(rec.prompt.ends_with("### Response:\n"));
        assert!(rec.prompt.contains("Article: India reports H1N1\n"));
        let back = parse_output(&RawModelOutput::new(rec.completion, "t"), &training_schema());
        assert_eq!(back.triples, ex.triples);
    }

    #[test]
    fn empty_example_sentinel() {
        let ex = LabeledExample::new("d", "nothing here", vec![], Origin::Curated).unwrap();
        let rec = to_training_record(&ex).unwrap();
        assert_eq!(rec.completion, NO_RELATIONS);
        let back = parse_output(&RawModelOutput::new(rec.completion, "t"), &training_schema());
        assert!(back.triples.is_empty() && back.rejected.is_empty());
    }

    #[test]
    fn reversed_triples_are_oriented() {
        let ex = LabeledExample::new(
            "d",
            "",
            vec![RelationTriple::new(
                ent(EntityType::CaseNumber, "two"),
                RelationType::CasesOf,
                ent(EntityType::InfectiousDisease, "H5N1"),
            )],
            Origin::Synthetic,
        )
        .unwrap();
        assert_eq!(ex.triples[0].subject.etype, EntityType::InfectiousDisease);
    }

    #[test]
    fn invalid_examples_rejected() {
        let bad_pair = LabeledExample::new(
            "d",
            "",
            vec![RelationTriple::new(
                ent(EntityType::Location, "Laos"),
                RelationType::CausedBy,
                ent(EntityType::Pathogen, "H5N1"),
            )],
            Origin::Synthetic,
        );
        assert!(matches!(bad_pair, Err(DatasetError::ValidationFailure(_))));
        let quoted = LabeledExample::new(
            "d",
            "",
            vec![RelationTriple::new(
                ent(EntityType::InfectiousDisease, "the \"new\" flu"),
                RelationType::LocatedAt,
                ent(EntityType::Location, "Laos"),
            )],
            Origin::Synthetic,
        );
        assert!(quoted.is_err());
    }

    #[test]
    fn split_arithmetic() {
        let items: Vec<u32> = (0..300).collect();
        let (train, val) = split(&items, 0.01, 7).unwrap();
        assert_eq!((train.len(), val.len()), (297, 3));
        assert_eq!(split(&items, 0.01, 7).unwrap(), (train.clone(), val.clone()));
        let mut all: Vec<u32> = train.iter().chain(&val).copied().collect();
        all.sort();
        assert_eq!(all, items);

        let (train, val) = split(&items, 0.0, 7).unwrap();
        assert_eq!((train.len(), val.len()), (300, 0));
        let (_, val) = split(&(0..100).collect::<Vec<_>>(), 0.07, 1).unwrap();
        assert_eq!(val.len(), 7);
        let (_, val) = split(&(0..10).collect::<Vec<_>>(), 0.01, 1).unwrap();
        assert_eq!(val.len(), 1);
        assert!(split(&items, 1.0, 0).is_err());
        assert!(split(&items, -0.1, 0).is_err());
        assert!(split(&items, f64::NAN, 0).is_err());
    }

    #[test]
    fn different_seeds_differ() {
        let items: Vec<u32> = (0..300).collect();
        let (_, a) = split(&items, 0.1, 1).unwrap();
        let (_, b) = split(&items, 0.1, 2).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn config_values() {
        let c = emit_finetune_config("NousResearch/Llama-2-13b-hf");
        assert_eq!(c.lora_r, 64);
        assert_eq!(c.num_epochs, 3);
        assert_eq!(c.val_set_size, 0.01);
        assert_eq!(c.adapter, "qlora");
        assert_eq!(c.learning_rate, 0.0002);
        let yaml = c.to_yaml();
        assert!(yaml.starts_with("base_model: NousResearch/Llama-2-13b-hf\n"));
        for line in [
            "learning_rate: 0.0002\n",
            "optimizer: paged_adamw_32bit\n",
            "weight_decay: 0.0\n",
            "lora_dropout: 0.05\n",
            "val_set_size: 0.01\n",
            "special_tokens:\n  bos_token: \"<s>\"\n  eos_token: \"</s>\"\n  unk_token: \"<unk>\"\n",
        ] {
            assert!(yaml.contains(line), "missing {line:?} in\n{yaml}");
        }
        assert_eq!(yaml, emit_finetune_config("NousResearch/Llama-2-13b-hf").to_yaml());
    }

    #[test]
    fn config_key_set_is_exact() {
        let value = serde_json::to_value(emit_finetune_config("x")).unwrap();
        let keys: Vec<&str> = value.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys[0], "base_model");
        assert_eq!(&keys[1..], &FINETUNE_KEYS[..]);
    }
}
