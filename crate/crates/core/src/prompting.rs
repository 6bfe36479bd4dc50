//! The three prompts of the pipeline, loaded verbatim from `templates/`.
//!
//! Rendering substitutes the article for the `{content}` placeholder and
//! does nothing else.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::PromptError;

pub const PLACEHOLDER: &str = "{content}";

const SYNTHESIS_SYSTEM: &str = include_str!("../templates/synthesis.system.txt");
const SYNTHESIS_USER: &str = include_str!("../templates/synthesis.user.txt");
const ANNOTATION_SYSTEM: &str = include_str!("../templates/annotation.system.txt");
const ANNOTATION_USER: &str = include_str!("../templates/annotation.user.txt");
const INFERENCE: &str = include_str!("../templates/inference.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    /// Writes a new synthetic outbreak article from a one-shot example.
    Synthesis,
    /// One-shot entity/relation labelling of an article.
    Annotation,
    /// Instruction/response prompt served to the fine-tuned models.
    Inference,
}

impl TemplateId {
    pub const ALL: [TemplateId; 3] = [
        TemplateId::Synthesis,
        TemplateId::Annotation,
        TemplateId::Inference,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::Synthesis => "synthesis",
            TemplateId::Annotation => "annotation",
            TemplateId::Inference => "inference",
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| PromptError::UnknownTemplate(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub system_text: Option<&'static str>,
    pub user_template: &'static str,
}

impl PromptTemplate {
    pub fn get(id: TemplateId) -> PromptTemplate {
        let (system_text, user_template) = match id {
            TemplateId::Synthesis => (Some(SYNTHESIS_SYSTEM), SYNTHESIS_USER),
            TemplateId::Annotation => (Some(ANNOTATION_SYSTEM), ANNOTATION_USER),
            TemplateId::Inference => (None, INFERENCE),
        };
        PromptTemplate {
            id,
            system_text,
            user_template,
        }
    }

    pub fn takes_article(&self) -> bool {
        self.user_template.contains(PLACEHOLDER)
    }

    /// File names and contents making up this template on disk.
    pub fn files(&self) -> Vec<(&'static str, &'static str)> {
        match self.id {
            TemplateId::Synthesis => vec![
                ("synthesis.system.txt", SYNTHESIS_SYSTEM),
                ("synthesis.user.txt", SYNTHESIS_USER),
            ],
            TemplateId::Annotation => vec![
                ("annotation.system.txt", ANNOTATION_SYSTEM),
                ("annotation.user.txt", ANNOTATION_USER),
            ],
            TemplateId::Inference => vec![("inference.txt", INFERENCE)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub system: Option<String>,
    pub user: String,
}

pub fn render(id: TemplateId, article: Option<&str>) -> Result<RenderedPrompt, PromptError> {
    let template = PromptTemplate::get(id);
    let user = match (template.takes_article(), article) {
        (true, Some(a)) => template.user_template.replacen(PLACEHOLDER, a, 1),
        (true, None) => return Err(PromptError::MissingArticle(id.to_string())),
        (false, Some(_)) => return Err(PromptError::UnexpectedArticle(id.to_string())),
        (false, None) => template.user_template.to_string(),
    };
    Ok(RenderedPrompt {
        system: template.system_text.map(str::to_string),
        user,
    })
}

/// Renders a template named by string, for callers taking user input.
pub fn render_named(name: &str, article: Option<&str>) -> Result<RenderedPrompt, PromptError> {
    render(name.parse()?, article)
}

/// SHA-256 (hex) over the template's files, each prefixed by its name and
/// byte length so that moving text between system and user changes it.
pub fn template_digest(id: TemplateId) -> String {
    let mut hasher = Sha256::new();
    for (name, body) in PromptTemplate::get(id).files() {
        hasher.update(name.as_bytes());
        hasher.update([0u8]);
        hasher.update((body.len() as u64).to_le_bytes());
        hasher.update(body.as_bytes());
    }
    hex::encode(hasher.finalize())
}

pub fn template_digest_named(name: &str) -> Result<String, PromptError> {
    Ok(template_digest(name.parse()?))
}

/// Relation phrases listed in a template's `- "x" is between:` lines.
pub fn listed_relations(text: &str) -> Vec<String> {
    text.lines()
        .filter_map(|l| {
            let l = l.trim_start().strip_prefix("- \"")?;
            let end = l.find('"')?;
            l[end + 1..]
                .starts_with(" is between:")
                .then(|| l[..end].to_string())
        })
        .collect()
}
