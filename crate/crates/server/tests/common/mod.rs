#![allow(dead_code)]

use std::path::Path;

use rena_core::config::{ModelKind, ModelSpec};
use rena_core::{AppConfig, Pipeline};
use rena_server::ApiOptions;

pub const ARTICLE: &str = "Laos reports two H5N1 avian influenza poultry outbreaks. \
The outbreaks struck birds in Saravane province and in Khantharath district.";

pub const STUB_TOML: &str = r#"
[[models]]
id = "openorca-platypus2-13b"
display_name = "OpenOrca-Platypus2-13B"
endpoint = "stub:"
kind = "completion"

[[models]]
id = "mythical-destroyer-v2-l2-13b"
display_name = "Mythical-Destroyer-V2-L2-13B"
endpoint = "stub:"
kind = "completion"
"#;

pub fn stub_config() -> AppConfig {
    AppConfig::from_toml_str(STUB_TOML).unwrap()
}

pub fn with_models(models: Vec<ModelSpec>) -> AppConfig {
    AppConfig {
        models,
        ..AppConfig::default()
    }
}

pub fn stub_model(id: &str) -> ModelSpec {
    ModelSpec::new(id, id, "stub:", ModelKind::Completion)
}

/// A service on an ephemeral port, stopped when dropped.
pub struct TestServer {
    pub base: String,
    _runtime: tokio::runtime::Runtime,
}

pub fn start(config: &AppConfig) -> TestServer {
    start_with(config, &ApiOptions::default())
}

pub fn start_with(config: &AppConfig, options: &ApiOptions) -> TestServer {
    let app = rena_server::router(Pipeline::from_config(config), options).unwrap();
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .unwrap();
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    runtime.spawn(async move {
        let listener = tokio::net::TcpListener::from_std(listener).unwrap();
        axum::serve(listener, app).await.unwrap();
    });
    TestServer {
        base,
        _runtime: runtime,
    }
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .build()
        .into()
}

pub fn post(server: &TestServer, path: &str, body: &str) -> (u16, String) {
    let mut resp = agent()
        .post(&format!("{}{path}", server.base))
        .header("content-type", "application/json")
        .send(body)
        .unwrap();
    (resp.status().as_u16(), resp.body_mut().with_config().limit(64 << 20).read_to_string().unwrap())
}

pub fn get(server: &TestServer, path: &str) -> (u16, String) {
    let mut resp = agent().get(&format!("{}{path}", server.base)).call().unwrap();
    (resp.status().as_u16(), resp.body_mut().read_to_string().unwrap())
}

pub fn extract_body(article: &str, model: &str, max_tokens: u32) -> String {
    serde_json::json!({"article": article, "model": model, "max_tokens": max_tokens}).to_string()
}

pub fn write_stub_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("rena.toml");
    std::fs::write(&path, STUB_TOML).unwrap();
    path
}
