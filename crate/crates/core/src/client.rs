//! Text generation over OpenAI-compatible HTTP endpoints, plus the offline
//! `stub:` backend.

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use crate::config::{AppConfig, ClientSettings, ModelKind, ModelSpec};
use crate::error::ClientError;
use crate::parser::RawModelOutput;
use crate::prompting::RenderedPrompt;

/// Completion returned by the stub backend for prompts that mention
/// avian influenza: the one-shot example output, verbatim.
pub const STUB_COMPLETION: &str = include_str!("../fixtures/stub_completion.txt");
pub const STUB_EMPTY_COMPLETION: &str = "No relations found.\n";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    Timeout,
    Unreachable(String),
}

/// Minimal HTTP surface the client needs. Implementations must be safe to
/// share between request handlers.
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, body: &Value, timeout: Duration)
        -> Result<HttpReply, TransportError>;
    fn get(&self, url: &str, timeout: Duration) -> Result<HttpReply, TransportError>;
}

/// `ureq`-backed transport; the agent pools connections internally.
#[derive(Clone)]
pub struct HttpTransport {
    agent: ureq::Agent,
}

impl Default for HttpTransport {
    fn default() -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        HttpTransport { agent }
    }
}

fn map_ureq_error(e: ureq::Error) -> TransportError {
    match e {
        ureq::Error::Timeout(_) => TransportError::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => TransportError::Timeout,
        other => TransportError::Unreachable(other.to_string()),
    }
}

fn read_reply(mut resp: ureq::http::Response<ureq::Body>) -> Result<HttpReply, TransportError> {
    let status = resp.status().as_u16();
    let body = resp
        .body_mut()
        .read_to_string()
        .map_err(map_ureq_error)?;
    Ok(HttpReply { status, body })
}

impl Transport for HttpTransport {
    fn post_json(
        &self,
        url: &str,
        body: &Value,
        timeout: Duration,
    ) -> Result<HttpReply, TransportError> {
        let resp = self
            .agent
            .post(url)
            .config()
            .timeout_global(Some(timeout))
            .build()
            .send_json(body)
            .map_err(map_ureq_error)?;
        read_reply(resp)
    }

    fn get(&self, url: &str, timeout: Duration) -> Result<HttpReply, TransportError> {
        let resp = self
            .agent
            .get(url)
            .config()
            .timeout_global(Some(timeout))
            .build()
            .call()
            .map_err(map_ureq_error)?;
        read_reply(resp)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    pub model: String,
    pub prompt: RenderedPrompt,
    pub max_tokens: u32,
    pub temperature: f64,
}

impl GenerationRequest {
    pub fn new(model: &str, prompt: RenderedPrompt, max_tokens: u32) -> Self {
        GenerationRequest {
            model: model.to_string(),
            prompt,
            max_tokens,
            temperature: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationResponse {
    pub raw: RawModelOutput,
    pub latency_ms: u64,
    pub backend_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub timeout: Duration,
    /// Extra attempts after the first one, on transport failures only.
    pub retries: u32,
    pub backoff_base: Duration,
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based): base × 2^(retry-1).
    pub fn backoff(&self, retry: u32) -> Duration {
        self.backoff_base
            .saturating_mul(1u32.checked_shl(retry.saturating_sub(1)).unwrap_or(u32::MAX))
    }
}

impl From<&ClientSettings> for RetryPolicy {
    fn from(s: &ClientSettings) -> Self {
        RetryPolicy {
            timeout: s.timeout(),
            retries: s.retries,
            backoff_base: Duration::from_millis(s.backoff_ms),
        }
    }
}

fn join_url(base: &str, path: &str) -> String {
    let base = base.trim_end_matches('/');
    if base.ends_with("/v1") {
        format!("{base}{path}")
    } else {
        format!("{base}/v1{path}")
    }
}

/// Shareable generation client over a fixed model registry.
#[derive(Clone)]
pub struct InferenceClient {
    models: Arc<Vec<ModelSpec>>,
    transport: Arc<dyn Transport>,
    policy: RetryPolicy,
    temperature: f64,
}

impl InferenceClient {
    pub fn new(models: Vec<ModelSpec>, transport: Arc<dyn Transport>, policy: RetryPolicy) -> Self {
        InferenceClient {
            models: Arc::new(models),
            transport,
            policy,
            temperature: 0.0,
        }
    }

    pub fn from_config(config: &AppConfig) -> Self {
        let mut client = InferenceClient::new(
            config.models.clone(),
            Arc::new(HttpTransport::default()),
            RetryPolicy::from(&config.client),
        );
        client.temperature = config.client.temperature;
        client
    }

    pub fn default_temperature(&self) -> f64 {
        self.temperature
    }

    /// Registered models, in configuration order.
    pub fn list_models(&self) -> &[ModelSpec] {
        &self.models
    }

    pub fn model(&self, id: &str) -> Result<&ModelSpec, ClientError> {
        self.models
            .iter()
            .find(|m| m.id == id)
            .ok_or_else(|| ClientError::UnknownModel(id.to_string()))
    }

    pub fn payload(spec: &ModelSpec, request: &GenerationRequest) -> Value {
        match spec.kind {
            ModelKind::Chat => {
                let mut messages = Vec::new();
                if let Some(system) = &request.prompt.system {
                    messages.push(json!({"role": "system", "content": system}));
                }
                messages.push(json!({"role": "user", "content": request.prompt.user}));
                json!({
                    "model": spec.served_name(),
                    "messages": messages,
                    "max_tokens": request.max_tokens,
                    "temperature": request.temperature,
                })
            }
            ModelKind::Completion => {
                let prompt = match &request.prompt.system {
                    Some(system) => format!("{system}\n\n{}", request.prompt.user),
                    None => request.prompt.user.clone(),
                };
                json!({
                    "model": spec.served_name(),
                    "prompt": prompt,
                    "max_tokens": request.max_tokens,
                    "temperature": request.temperature,
                })
            }
        }
    }

    pub fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, ClientError> {
        if request.max_tokens == 0 {
            return Err(ClientError::InvalidRequest("max_tokens must be at least 1".into()));
        }
        if !(request.temperature >= 0.0) {
            return Err(ClientError::InvalidRequest("temperature must be non-negative".into()));
        }
        let spec = self.model(&request.model)?;
        let started = Instant::now();

        let (text, backend_id) = if spec.is_stub() {
            (stub_generate(request), "stub".to_string())
        } else {
            (self.generate_http(spec, request)?, spec.endpoint.clone())
        };

        Ok(GenerationResponse {
            raw: RawModelOutput::new(text, &spec.id),
            latency_ms: started.elapsed().as_millis() as u64,
            backend_id,
        })
    }

    fn generate_http(
        &self,
        spec: &ModelSpec,
        request: &GenerationRequest,
    ) -> Result<String, ClientError> {
        let (path, kind) = match spec.kind {
            ModelKind::Chat => ("/chat/completions", ModelKind::Chat),
            ModelKind::Completion => ("/completions", ModelKind::Completion),
        };
        let url = join_url(&spec.endpoint, path);
        let body = Self::payload(spec, request);

        let attempts = self.policy.retries + 1;
        let mut last = TransportError::Unreachable("no attempt made".into());
        for attempt in 1..=attempts {
            if attempt > 1 {
                std::thread::sleep(self.policy.backoff(attempt - 1));
            }
            match self.transport.post_json(&url, &body, self.policy.timeout) {
                Ok(reply) if (200..300).contains(&reply.status) => {
                    return extract_text(kind, &reply);
                }
                Ok(reply) => {
                    return Err(ClientError::BackendError {
                        status: reply.status,
                        body: reply.body,
                    })
                }
                Err(e) => last = e,
            }
        }
        Err(match last {
            TransportError::Timeout => ClientError::Timeout { attempts },
            TransportError::Unreachable(detail) => {
                ClientError::BackendUnreachable { attempts, detail }
            }
        })
    }

    /// Lightweight reachability check; any HTTP answer counts as reachable.
    pub fn probe(&self, spec: &ModelSpec, timeout: Duration) -> bool {
        if spec.is_stub() {
            return true;
        }
        self.transport
            .get(&join_url(&spec.endpoint, "/models"), timeout)
            .is_ok()
    }
}

fn extract_text(kind: ModelKind, reply: &HttpReply) -> Result<String, ClientError> {
    let bad = |why: &str| ClientError::BackendError {
        status: reply.status,
        body: format!("{why}: {}", reply.body),
    };
    let value: Value = serde_json::from_str(&reply.body).map_err(|_| bad("response is not JSON"))?;
    let choice = &value["choices"][0];
    let text = match kind {
        ModelKind::Chat => choice["message"]["content"].as_str(),
        ModelKind::Completion => choice["text"].as_str(),
    };
    text.map(str::to_string)
        .ok_or_else(|| bad("response has no completion text"))
}

/// Deterministic offline backend. Word-level truncation stands in for
/// the token limit.
fn stub_generate(request: &GenerationRequest) -> String {
    let mut haystack = request.prompt.user.to_lowercase();
    if let Some(system) = &request.prompt.system {
        haystack.push_str(&system.to_lowercase());
    }
    let text = if haystack.contains("avian influenza") {
        STUB_COMPLETION
    } else {
        STUB_EMPTY_COMPLETION
    };
    truncate_words(text, request.max_tokens as usize)
}

fn truncate_words(text: &str, max_words: usize) -> String {
    let mut words = 0;
    let mut in_word = false;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            in_word = false;
        } else if !in_word {
            in_word = true;
            words += 1;
            if words > max_words {
                return text[..i].trim_end().to_string();
            }
        }
    }
    text.to_string()
}
