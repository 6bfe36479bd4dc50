//! JSON API over a [`Pipeline`].
//!
//! | route              | body / reply                                         |
//! |--------------------|------------------------------------------------------|
//! | `POST /api/extract`| `{article, model, max_tokens}` → extract response    |
//! | `GET /api/models`  | `[{id, display_name}]`                               |
//! | `GET /api/health`  | `{status, backends: {id: bool}, limits}`             |
//!
//! Errors are `{"error": code, "message": text}` with status 400 (bad body,
//! empty article, max_tokens out of range), 404 (unknown model), 413
//! (article or body too large), 502 (backend failure) or 504 (backend
//! timeout).

use std::path::PathBuf;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rena_core::{ExtractError, ExtractRequest, Pipeline};
use serde_json::{json, Map, Value};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};
use tower_http::services::ServeDir;

#[derive(Debug, Clone, Default)]
pub struct ApiOptions {
    /// Allowed CORS origins; empty allows any origin.
    pub cors_origins: Vec<String>,
    /// Directory of built UI assets served at `/`.
    pub static_dir: Option<PathBuf>,
}

#[derive(Clone)]
struct AppState {
    pipeline: Pipeline,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }
}

impl From<ExtractError> for ApiError {
    fn from(e: ExtractError) -> Self {
        let message = e.to_string();
        match e {
            ExtractError::InvalidRequest(_) => {
                ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", message)
            }
            ExtractError::TooLarge { .. } => {
                ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "too_large", message)
            }
            ExtractError::UnknownModel(_) => {
                ApiError::new(StatusCode::NOT_FOUND, "unknown_model", message)
            }
            ExtractError::Timeout(_) => {
                ApiError::new(StatusCode::GATEWAY_TIMEOUT, "backend_timeout", message)
            }
            ExtractError::Backend(_) => {
                ApiError::new(StatusCode::BAD_GATEWAY, "backend_error", message)
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"error": self.code, "message": self.message});
        (self.status, Json(body)).into_response()
    }
}

/// Largest request body accepted. JSON escaping can inflate an article up
/// to six bytes per input byte (`\u00XX`), so the body cap is looser than
/// the article cap; the article cap is checked after decoding.
pub fn body_limit(max_article_bytes: usize) -> usize {
    max_article_bytes.saturating_mul(6).saturating_add(64 * 1024)
}

/// Builds the router. Fails on an empty model registry.
pub fn router(pipeline: Pipeline, options: &ApiOptions) -> anyhow::Result<Router> {
    if pipeline.client().list_models().is_empty() {
        anyhow::bail!("no models configured; refusing to start");
    }
    let limit = body_limit(pipeline.limits().max_article_bytes);
    let mut app = Router::new()
        .route("/api/extract", post(extract))
        .route("/api/models", get(models))
        .route("/api/health", get(health))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(AppState { pipeline });
    if let Some(dir) = &options.static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    Ok(app.layer(cors_layer(&options.cors_origins)?))
}

fn cors_layer(origins: &[String]) -> anyhow::Result<CorsLayer> {
    let allow = if origins.is_empty() {
        AllowOrigin::from(Any)
    } else {
        let values = origins
            .iter()
            .map(|o| HeaderValue::from_str(o))
            .collect::<Result<Vec<_>, _>>()?;
        AllowOrigin::list(values)
    };
    Ok(CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers(Any))
}

async fn extract(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: ExtractRequest = serde_json::from_slice(&body).map_err(|e| {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_body", format!("invalid request body: {e}"))
    })?;
    state.pipeline.validate(&req)?;
    let pipeline = state.pipeline.clone();
    let resp = tokio::task::spawn_blocking(move || pipeline.extract(&req))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(resp.to_json()).into_response())
}

async fn models(State(state): State<AppState>) -> Json<Value> {
    let list: Vec<Value> = state
        .pipeline
        .client()
        .list_models()
        .iter()
        .map(|m| json!({"id": m.id, "display_name": m.display_name}))
        .collect();
    Json(Value::Array(list))
}

async fn health(State(state): State<AppState>) -> Json<Value> {
    let limits = state.pipeline.limits();
    let timeout = Duration::from_millis(limits.health_probe_ms);
    let client = state.pipeline.client();
    let probes: Vec<_> = client
        .list_models()
        .iter()
        .map(|spec| {
            let (client, spec) = (client.clone(), spec.clone());
            let id = spec.id.clone();
            (id, tokio::task::spawn_blocking(move || client.probe(&spec, timeout)))
        })
        .collect();
    let mut backends = Map::new();
    for (id, probe) in probes {
        backends.insert(id, Value::Bool(probe.await.unwrap_or(false)));
    }
    Json(json!({
        "status": "ok",
        "backends": backends,
        "limits": {
            "max_tokens": limits.max_tokens,
            "max_article_bytes": limits.max_article_bytes,
        },
    }))
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(app: Router, addr: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app).await?;
    Ok(())
}
