//! `rena.toml` configuration: model registry, client retry policy and
//! request limits.
//!
//! ```toml
//! [client]
//! timeout_secs = 120
//! retries = 2
//! backoff_ms = 250
//!
//! [limits]
//! max_tokens = 4096
//! max_article_bytes = 1048576
//!
//! [server]
//! cors_origins = ["http://localhost:5173"]
//!
//! [[models]]
//! id = "openorca"
//! display_name = "OpenOrca-Platypus2-13B"
//! endpoint = "http://127.0.0.1:8001"
//! kind = "completion"          # or "chat"
//! template = "inference"       # optional, default inference
//! served_model = "..."         # optional, defaults to id
//! ```
//!
//! `RENA_ENDPOINT_<ID>` (id uppercased, non-alphanumerics as `_`) overrides
//! a model's endpoint.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::prompting::TemplateId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Chat,
    Completion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub id: String,
    pub display_name: String,
    pub endpoint: String,
    pub kind: ModelKind,
    #[serde(default = "default_template")]
    pub template: TemplateId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub served_model: Option<String>,
}

fn default_template() -> TemplateId {
    TemplateId::Inference
}

impl ModelSpec {
    pub fn new(id: &str, display_name: &str, endpoint: &str, kind: ModelKind) -> Self {
        ModelSpec {
            id: id.to_string(),
            display_name: display_name.to_string(),
            endpoint: endpoint.to_string(),
            kind,
            template: TemplateId::Inference,
            served_model: None,
        }
    }

    pub fn is_stub(&self) -> bool {
        self.endpoint.starts_with("stub:")
    }

    /// Model name sent in the request payload.
    pub fn served_name(&self) -> &str {
        self.served_model.as_deref().unwrap_or(&self.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClientSettings {
    pub timeout_secs: f64,
    pub retries: u32,
    pub backoff_ms: u64,
    pub temperature: f64,
}

impl Default for ClientSettings {
    fn default() -> Self {
        ClientSettings {
            timeout_secs: 120.0,
            retries: 2,
            backoff_ms: 250,
            temperature: 0.0,
        }
    }
}

impl ClientSettings {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Limits {
    /// Upper bound of the max-tokens slider; matches the fine-tuning
    /// sequence length.
    pub max_tokens: u32,
    pub max_article_bytes: usize,
    pub health_probe_ms: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_tokens: 4096,
            max_article_bytes: 1 << 20,
            health_probe_ms: 1000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerSettings {
    /// Allowed CORS origins; empty means any origin.
    pub cors_origins: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppConfig {
    #[serde(default)]
    pub client: ClientSettings,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default)]
    pub server: ServerSettings,
    #[serde(default)]
    pub models: Vec<ModelSpec>,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            client: ClientSettings::default(),
            limits: Limits::default(),
            server: ServerSettings::default(),
            models: default_models(),
        }
    }
}

/// The two fine-tuned 13B models, served locally behind
/// OpenAI-compatible completion endpoints.
pub fn default_models() -> Vec<ModelSpec> {
    vec![
        ModelSpec::new(
            "openorca-platypus2-13b",
            "OpenOrca-Platypus2-13B",
            "http://127.0.0.1:8001",
            ModelKind::Completion,
        ),
        ModelSpec::new(
            "mythical-destroyer-v2-l2-13b",
            "Mythical-Destroyer-V2-L2-13B",
            "http://127.0.0.1:8002",
            ModelKind::Completion,
        ),
    ]
}

pub fn endpoint_env_var(model_id: &str) -> String {
    let suffix: String = model_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_uppercase()
            } else {
                '_'
            }
        })
        .collect();
    format!("RENA_ENDPOINT_{suffix}")
}

impl AppConfig {
    pub fn from_toml_str(text: &str) -> Result<AppConfig, ConfigError> {
        let config: AppConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.check()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<AppConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        AppConfig::from_toml_str(&text)
    }

    /// Replaces endpoints from `RENA_ENDPOINT_<ID>` variables.
    pub fn apply_env_overrides(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        for model in &mut self.models {
            if let Some(endpoint) = lookup(&endpoint_env_var(&model.id)) {
                model.endpoint = endpoint;
            }
        }
    }

    pub fn with_process_env(mut self) -> Self {
        self.apply_env_overrides(|k| std::env::var(k).ok());
        self
    }

    fn check(&self) -> Result<(), ConfigError> {
        let mut ids = std::collections::HashSet::new();
        for m in &self.models {
            if m.id.trim().is_empty() {
                return Err(ConfigError::Invalid("model id is empty".into()));
            }
            if !ids.insert(m.id.as_str()) {
                return Err(ConfigError::Invalid(format!("duplicate model id {:?}", m.id)));
            }
            if m.template == TemplateId::Synthesis {
                return Err(ConfigError::Invalid(format!(
                    "model {:?}: the synthesis template takes no article",
                    m.id
                )));
            }
        }
        if self.limits.max_tokens == 0 {
            return Err(ConfigError::Invalid("limits.max_tokens must be at least 1".into()));
        }
        if !(self.client.timeout_secs > 0.0) {
            return Err(ConfigError::Invalid("client.timeout_secs must be positive".into()));
        }
        if !(self.client.temperature >= 0.0) {
            return Err(ConfigError::Invalid("client.temperature must be non-negative".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_registry() {
        let c = AppConfig::default();
        let names: Vec<_> = c.models.iter().map(|m| m.display_name.as_str()).collect();
        assert_eq!(names, ["OpenOrca-Platypus2-13B", "Mythical-Destroyer-V2-L2-13B"]);
        assert_eq!(c.limits.max_tokens, 4096);
        assert_eq!(c.client.retries, 2);
        assert_eq!(c.client.timeout(), Duration::from_secs(120));
        assert_eq!(c.client.temperature, 0.0);
    }

    #[test]
    fn parses_file_in_order() {
        let c = AppConfig::from_toml_str(
            r#"
[client]
retries = 1

[[models]]
id = "c"
display_name = "Gamma"
endpoint = "stub:"
kind = "chat"

[[models]]
id = "a"
display_name = "Alpha"
endpoint = "http://localhost:9000/v1"
kind = "completion"
template = "annotation"

[[models]]
id = "b"
display_name = "Beta"
endpoint = "http://localhost:9001"
kind = "completion"
"#,
        )
        .unwrap();
        let ids: Vec<_> = c.models.iter().map(|m| m.id.as_str()).collect();
        assert_eq!(ids, ["c", "a", "b"]);
        assert!(c.models[0].is_stub());
        assert_eq!(c.models[1].template, TemplateId::Annotation);
        assert_eq!(c.models[2].template, TemplateId::Inference);
        assert_eq!(c.client.retries, 1);
        assert_eq!(c.client.backoff_ms, 250);
    }

    #[test]
    fn empty_file_has_no_models() {
        assert!(AppConfig::from_toml_str("").unwrap().models.is_empty());
    }

    #[test]
    fn rejects_duplicates_and_bad_values() {
        let dup = r#"
[[models]]
id = "a"
display_name = "A"
endpoint = "stub:"
kind = "chat"
[[models]]
id = "a"
display_name = "B"
endpoint = "stub:"
kind = "chat"
"#;
        assert!(matches!(AppConfig::from_toml_str(dup), Err(ConfigError::Invalid(_))));
        assert!(AppConfig::from_toml_str("[limits]\nmax_tokens = 0").is_err());
        assert!(AppConfig::from_toml_str("[[models]]\nid = 3").is_err());
    }

    #[test]
    fn env_override() {
        let mut c = AppConfig::default();
        c.apply_env_overrides(|k| {
            (k == "RENA_ENDPOINT_OPENORCA_PLATYPUS2_13B").then(|| "http://gpu:9000".to_string())
        });
        assert_eq!(c.models[0].endpoint, "http://gpu:9000");
        assert_eq!(c.models[1].endpoint, "http://127.0.0.1:8002");
    }
}
