mod common;

use std::time::{Duration, Instant};

use common::*;
use rena_core::client::STUB_COMPLETION;
use rena_core::config::{ModelKind, ModelSpec};
use serde_json::Value;

#[test]
fn extract_returns_three_views() {
    let server = start(&stub_config());
    let (status, body) = post(&server, "/api/extract", &extract_body(ARTICLE, "openorca-platypus2-13b", 512));
    assert_eq!(status, 200, "{body}");
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["raw"], STUB_COMPLETION);
    assert_eq!(v["relation_table"].as_array().unwrap().len(), 4);
    assert_eq!(v["relations"]["relations"].as_array().unwrap().len(), 4);
    let spans = v["annotated"]["spans"].as_array().unwrap();
    let texts: Vec<_> = spans.iter().map(|s| s["text"].as_str().unwrap()).collect();
    assert_eq!(texts, ["two", "Saravane province", "Khantharath"]);
    assert!(v["timing_ms"].is_u64());
    let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
    assert_eq!(keys, ["raw", "relations", "annotated", "entity_table", "relation_table", "timing_ms"]);
}

#[test]
fn repeated_requests_are_identical() {
    let server = start(&stub_config());
    let body = extract_body(ARTICLE, "openorca-platypus2-13b", 512);
    let strip = |s: String| {
        let mut v: Value = serde_json::from_str(&s).unwrap();
        v.as_object_mut().unwrap().remove("timing_ms");
        v
    };
    let a = strip(post(&server, "/api/extract", &body).1);
    let b = strip(post(&server, "/api/extract", &body).1);
    assert_eq!(a, b);
}

#[test]
fn concurrent_requests() {
    let server = start(&stub_config());
    let body = extract_body(ARTICLE, "mythical-destroyer-v2-l2-13b", 512);
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..8).map(|_| s.spawn(|| post(&server, "/api/extract", &body).0)).collect();
        for h in handles {
            assert_eq!(h.join().unwrap(), 200);
        }
    });
}

#[test]
fn request_errors() {
    let server = start(&stub_config());
    let code = |body: &str| post(&server, "/api/extract", body).0;
    assert_eq!(code(&extract_body("   \n", "openorca-platypus2-13b", 10)), 400);
    assert_eq!(code(&extract_body(ARTICLE, "openorca-platypus2-13b", 0)), 400);
    assert_eq!(code(&extract_body(ARTICLE, "openorca-platypus2-13b", 4097)), 400);
    assert_eq!(code(r#"{"article": "x", "model": "openorca-platypus2-13b", "max_tokens": -1}"#), 400);
    assert_eq!(code(r#"{"article": "x"}"#), 400);
    assert_eq!(code("not json"), 400);
    assert_eq!(code(&extract_body(ARTICLE, "gpt-9", 10)), 404);

    let (status, body) = post(&server, "/api/extract", &extract_body(ARTICLE, "gpt-9", 10));
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(status, 404);
    assert_eq!(v["error"], "unknown_model");
}

#[test]
fn oversized_article_is_413() {
    let server = start(&stub_config());
    let article = "a".repeat((1 << 20) + 1);
    let (status, _) = post(&server, "/api/extract", &extract_body(&article, "openorca-platypus2-13b", 10));
    assert_eq!(status, 413);

    let at_limit = "avian influenza ".repeat(1 << 16);
    assert_eq!(at_limit.len(), 1 << 20);
    let (status, body) = post(&server, "/api/extract", &extract_body(&at_limit, "openorca-platypus2-13b", 10));
    assert_eq!(status, 200, "{body}");
}

#[test]
fn oversized_body_is_413() {
    let mut config = stub_config();
    config.limits.max_article_bytes = 1000;
    let server = start(&config);
    let body = format!("{{\"pad\": \"{}\"}}", "x".repeat(rena_server::api::body_limit(1000) + 1));
    assert_eq!(post(&server, "/api/extract", &body).0, 413);
}

#[test]
fn backend_failures_map_to_502_and_504() {
    let refused = ModelSpec::new("down", "Down", "http://127.0.0.1:1", ModelKind::Completion);
    let mut config = with_models(vec![refused]);
    config.client.retries = 0;
    let server = start(&config);
    let (status, body) = post(&server, "/api/extract", &extract_body(ARTICLE, "down", 10));
    assert_eq!(status, 502, "{body}");
    assert!(body.contains("backend_error"));

    // a listener that accepts but never answers
    let silent = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}", silent.local_addr().unwrap());
    let mut config = with_models(vec![ModelSpec::new("slow", "Slow", &endpoint, ModelKind::Completion)]);
    config.client.retries = 0;
    config.client.timeout_secs = 0.3;
    let server = start(&config);
    let (status, body) = post(&server, "/api/extract", &extract_body(ARTICLE, "slow", 10));
    assert_eq!(status, 504, "{body}");
    drop(silent);
}

#[test]
fn models_reflect_registry() {
    let server = start(&stub_config());
    let (status, body) = get(&server, "/api/models");
    assert_eq!(status, 200);
    assert_eq!(
        body,
        r#"[{"id":"openorca-platypus2-13b","display_name":"OpenOrca-Platypus2-13B"},{"id":"mythical-destroyer-v2-l2-13b","display_name":"Mythical-Destroyer-V2-L2-13B"}]"#
    );
}

#[test]
fn health_reports_unreachable_backend_quickly() {
    let config = with_models(vec![
        stub_model("stub"),
        ModelSpec::new("refused", "Refused", "http://127.0.0.1:1", ModelKind::Completion),
        ModelSpec::new("blackhole", "Blackhole", "http://10.255.255.1:9", ModelKind::Chat),
    ]);
    let server = start(&config);
    let started = Instant::now();
    let (status, body) = get(&server, "/api/health");
    let elapsed = started.elapsed();
    assert_eq!(status, 200);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["status"], "ok");
    assert_eq!(v["backends"]["stub"], true);
    assert_eq!(v["backends"]["refused"], false);
    assert_eq!(v["backends"]["blackhole"], false);
    assert_eq!(v["limits"]["max_tokens"], 4096);
    assert!(elapsed < Duration::from_secs(2), "{elapsed:?}");
}

#[test]
fn empty_registry_refuses_to_start() {
    let pipeline = rena_core::Pipeline::from_config(&with_models(vec![]));
    assert!(rena_server::router(pipeline, &Default::default()).is_err());
}

#[test]
fn cors_allows_configured_origin_only() {
    let options = rena_server::ApiOptions {
        cors_origins: vec!["http://localhost:5173".into()],
        static_dir: None,
    };
    let server = start_with(&stub_config(), &options);
    let allow = |origin: &str| {
        let resp = ureq::get(&format!("{}/api/models", server.base))
            .header("origin", origin)
            .call()
            .unwrap();
        resp.headers()
            .get("access-control-allow-origin")
            .map(|v| v.to_str().unwrap().to_string())
    };
    assert_eq!(allow("http://localhost:5173").as_deref(), Some("http://localhost:5173"));
    assert_eq!(allow("http://evil.example"), None);

    let open = start(&stub_config());
    let resp = ureq::get(&format!("{}/api/models", open.base))
        .header("origin", "http://anywhere.example")
        .call()
        .unwrap();
    assert_eq!(resp.headers().get("access-control-allow-origin").unwrap(), "*");
}

#[test]
fn serves_static_assets() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<h1>rena</h1>").unwrap();
    let options = rena_server::ApiOptions {
        cors_origins: vec![],
        static_dir: Some(dir.path().to_path_buf()),
    };
    let server = start_with(&stub_config(), &options);
    assert_eq!(get(&server, "/index.html"), (200, "<h1>rena</h1>".to_string()));
    assert_eq!(get(&server, "/api/models").0, 200);
}
