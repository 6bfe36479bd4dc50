//! Closed vocabulary of entity and relation types, and the legal
//! (subject, relation, object) type pairs a triple may take.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::SchemaError;

/// Entity categories recognised by the extractor, in canonical order.
///
/// The order matters: color assignment and table rendering follow it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityType {
    InfectiousDisease,
    Pathogen,
    SymptomSyndrome,
    Location,
    EventDate,
    CaseNumber,
    DeathNumber,
    People,
}

impl EntityType {
    pub const ALL: [EntityType; 8] = [
        EntityType::InfectiousDisease,
        EntityType::Pathogen,
        EntityType::SymptomSyndrome,
        EntityType::Location,
        EntityType::EventDate,
        EntityType::CaseNumber,
        EntityType::DeathNumber,
        EntityType::People,
    ];

    pub fn canonical_name(self) -> &'static str {
        match self {
            EntityType::InfectiousDisease => "infectious_disease",
            EntityType::Pathogen => "pathogen",
            EntityType::SymptomSyndrome => "symptom_syndrome",
            EntityType::Location => "location",
            EntityType::EventDate => "event_date",
            EntityType::CaseNumber => "case_number",
            EntityType::DeathNumber => "death_number",
            EntityType::People => "people",
        }
    }

    /// Surface keys accepted in model output. The first entry is the key
    /// used when writing triples back out as completion lines.
    pub fn aliases(self) -> &'static [&'static str] {
        match self {
            EntityType::InfectiousDisease => &["infectious disease", "disease"],
            EntityType::Pathogen => &["pathogen"],
            EntityType::SymptomSyndrome => &["symptom/syndrome", "syndrome", "symptom", "symptoms"],
            EntityType::Location => &["location"],
            EntityType::EventDate => &["event date", "date"],
            EntityType::CaseNumber => &[
                "case numbers",
                "case number",
                "new confirmed cases",
            ],
            EntityType::DeathNumber => &[
                "death numbers",
                "death number",
                "overall confirmed deaths",
            ],
            EntityType::People => &["people", "host"],
        }
    }

    /// Key written in completion lines.
    pub fn output_key(self) -> &'static str {
        self.aliases()[0]
    }

    /// Resolve a key from model output (or a canonical name) to a type.
    ///
    /// Keys are casefolded, trimmed and whitespace-collapsed before lookup.
    pub fn from_key(key: &str) -> Result<EntityType, SchemaError> {
        let norm = normalize_key(key);
        for t in EntityType::ALL {
            if t.canonical_name() == norm || t.aliases().contains(&norm.as_str()) {
                return Ok(t);
            }
        }
        Err(SchemaError::UnknownEntityKey(key.to_string()))
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical_name())
    }
}

/// Shorthand for [`EntityType::from_key`].
pub fn entity_type_from_key(key: &str) -> Result<EntityType, SchemaError> {
    EntityType::from_key(key)
}

/// The seven relation types, in the order the extraction prompt lists them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationType {
    LocatedAt,
    OccurredOn,
    AreSymptomsOf,
    DeathsOf,
    CasesOf,
    CausedBy,
    AffectedBy,
}

impl RelationType {
    pub const ALL: [RelationType; 7] = [
        RelationType::LocatedAt,
        RelationType::OccurredOn,
        RelationType::AreSymptomsOf,
        RelationType::DeathsOf,
        RelationType::CasesOf,
        RelationType::CausedBy,
        RelationType::AffectedBy,
    ];

    pub fn canonical_name(self) -> &'static str {
        match self {
            RelationType::LocatedAt => "located_at",
            RelationType::OccurredOn => "occurred_on",
            RelationType::AreSymptomsOf => "are_symptoms_of",
            RelationType::DeathsOf => "deaths_of",
            RelationType::CasesOf => "cases_of",
            RelationType::CausedBy => "caused_by",
            RelationType::AffectedBy => "affected_by",
        }
    }

    /// The phrase used in prompts and completion lines.
    pub fn surface(self) -> &'static str {
        match self {
            RelationType::LocatedAt => "located at",
            RelationType::OccurredOn => "occurred on",
            RelationType::AreSymptomsOf => "are symptoms of",
            RelationType::DeathsOf => "deaths of",
            RelationType::CasesOf => "cases of",
            RelationType::CausedBy => "caused by",
            RelationType::AffectedBy => "affected by",
        }
    }

    pub fn from_surface(text: &str) -> Result<RelationType, SchemaError> {
        let norm = normalize_key(text);
        if norm == "death of" {
            return Ok(RelationType::DeathsOf);
        }
        RelationType::ALL
            .into_iter()
            .find(|r| r.surface() == norm || r.canonical_name() == norm)
            .ok_or_else(|| SchemaError::UnknownRelation(text.to_string()))
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical_name())
    }
}

fn normalize_key(key: &str) -> String {
    key.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// A typed mention. The surface keeps its original casing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Entity {
    #[serde(rename = "type")]
    pub etype: EntityType,
    #[serde(rename = "text")]
    pub surface: String,
}

impl Entity {
    /// Builds an entity, trimming the surface. Fails on a blank surface.
    pub fn new(etype: EntityType, surface: &str) -> Result<Entity, SchemaError> {
        let surface = surface.trim();
        if surface.is_empty() {
            return Err(SchemaError::EmptySurface);
        }
        Ok(Entity {
            etype,
            surface: surface.to_string(),
        })
    }
}

/// One extracted fact linking exactly two entities.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationTriple {
    pub subject: Entity,
    pub relation: RelationType,
    pub object: Entity,
}

impl RelationTriple {
    pub fn new(subject: Entity, relation: RelationType, object: Entity) -> Self {
        RelationTriple {
            subject,
            relation,
            object,
        }
    }

    pub fn reversed(&self) -> RelationTriple {
        RelationTriple {
            subject: self.object.clone(),
            relation: self.relation,
            object: self.subject.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ValidationMode {
    Strict,
    #[default]
    Symmetric,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// The pair is legal; `reversed` is set when only the reversed
    /// direction is in the schema (symmetric mode).
    Valid { reversed: bool },
    Invalid(String),
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid { .. })
    }
}

pub type TypePair = (EntityType, RelationType, EntityType);

/// Legal (subject, relation, object) type combinations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationSchema {
    allowed_pairs: BTreeSet<TypePair>,
}

/// Pair that appears in the one-shot example output (a death count linked
/// to a host) but not in the declared relation list.
pub const DEATHS_OF_HOST_EXTENSION: TypePair = (
    EntityType::DeathNumber,
    RelationType::DeathsOf,
    EntityType::People,
);

impl RelationSchema {
    pub fn new(pairs: impl IntoIterator<Item = TypePair>) -> Self {
        RelationSchema {
            allowed_pairs: pairs.into_iter().collect(),
        }
    }

    /// The default schema plus the deaths-of-host extension pair.
    pub fn with_extension() -> Self {
        let mut schema = default_schema();
        schema.allowed_pairs.insert(DEATHS_OF_HOST_EXTENSION);
        schema
    }

    pub fn allowed_pairs(&self) -> &BTreeSet<TypePair> {
        &self.allowed_pairs
    }

    pub fn allows(&self, subject: EntityType, relation: RelationType, object: EntityType) -> bool {
        self.allowed_pairs.contains(&(subject, relation, object))
    }

    pub fn pairs_for(&self, relation: RelationType) -> Vec<(EntityType, EntityType)> {
        self.allowed_pairs
            .iter()
            .filter(|(_, r, _)| *r == relation)
            .map(|(s, _, o)| (*s, *o))
            .collect()
    }

    pub fn validate(&self, triple: &RelationTriple, mode: ValidationMode) -> Verdict {
        let (s, r, o) = (triple.subject.etype, triple.relation, triple.object.etype);
        if self.allows(s, r, o) {
            return Verdict::Valid { reversed: false };
        }
        if mode == ValidationMode::Symmetric && self.allows(o, r, s) {
            return Verdict::Valid { reversed: true };
        }
        Verdict::Invalid(format!("pair ({s}, {r}, {o}) is not in the schema"))
    }

    /// JSON description used by the CLI and UI to list legal pairs.
    pub fn to_json(&self) -> serde_json::Value {
        let entity_types: Vec<_> = EntityType::ALL
            .iter()
            .map(|t| {
                serde_json::json!({
                    "name": t.canonical_name(),
                    "aliases": t.aliases(),
                })
            })
            .collect();
        let relations: Vec<_> = RelationType::ALL
            .iter()
            .map(|r| {
                let pairs: Vec<[&str; 2]> = self
                    .pairs_for(*r)
                    .into_iter()
                    .map(|(s, o)| [s.canonical_name(), o.canonical_name()])
                    .collect();
                serde_json::json!({ "name": r.canonical_name(), "pairs": pairs })
            })
            .collect();
        serde_json::json!({ "entity_types": entity_types, "relations": relations })
    }
}

impl Default for RelationSchema {
    fn default() -> Self {
        default_schema()
    }
}

/// Free-function form of [`RelationSchema::validate`].
pub fn validate_triple(
    schema: &RelationSchema,
    triple: &RelationTriple,
    mode: ValidationMode,
) -> Verdict {
    schema.validate(triple, mode)
}

/// The twelve pairs declared in the extraction prompt's relation list.
pub fn default_schema() -> RelationSchema {
    use EntityType::*;
    use RelationType::*;
    RelationSchema::new([
        (InfectiousDisease, LocatedAt, Location),
        (SymptomSyndrome, LocatedAt, Location),
        (CaseNumber, LocatedAt, Location),
        (InfectiousDisease, OccurredOn, EventDate),
        (SymptomSyndrome, OccurredOn, EventDate),
        (CaseNumber, OccurredOn, EventDate),
        (InfectiousDisease, AreSymptomsOf, SymptomSyndrome),
        (InfectiousDisease, DeathsOf, DeathNumber),
        (InfectiousDisease, CasesOf, CaseNumber),
        (SymptomSyndrome, CasesOf, CaseNumber),
        (InfectiousDisease, CausedBy, Pathogen),
        (People, AffectedBy, InfectiousDisease),
    ])
}
