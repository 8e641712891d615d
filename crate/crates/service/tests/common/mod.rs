#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use qir_core::corpus::{Corpus, IngestConfig};
use qir_core::{Engine, SessionConfig, TWO_TOPIC_FIXTURE};
use qir_service::{router, AppState};
use serde_json::Value;
use tower::ServiceExt;

pub fn fixture_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/two_topic.jsonl")
}

pub fn fixture_engine() -> Arc<Engine> {
    let raw = Corpus::parse_jsonl(TWO_TOPIC_FIXTURE).unwrap();
    let corpus = Corpus::ingest(&raw, &IngestConfig::default()).unwrap();
    Arc::new(Engine::new(Arc::new(corpus)).unwrap())
}

/// Tiger session that switches to the lion museums at t=4.
pub const SCRIPTED_LOG: &str = r#"{"t":0,"event":{"type":"query","text":"tiger"}}
{"t":1,"event":{"type":"click","doc_id":"tiger-09"}}
{"t":2,"event":{"type":"click","doc_id":"tiger-01"}}
{"t":3,"event":{"type":"judgment","doc_id":"tiger-07","positive":true}}
{"t":4,"event":{"type":"query","text":"lion museums"}}
{"t":5,"event":{"type":"click","doc_id":"lion-08"}}
"#;

pub fn app(max_dense_dim: usize) -> (AppState, Router) {
    let mut state = AppState::new(fixture_engine(), SessionConfig::default());
    state.max_dense_dim = max_dense_dim;
    let r = router(state.clone());
    (state, r)
}

pub async fn call(
    app: &Router,
    method: &str,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes)
            .unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

pub async fn create(app: &Router, overrides: Option<Value>) -> String {
    let (status, body) = call(app, "POST", "/sessions", overrides).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["session_id"].as_str().unwrap().to_string()
}

pub async fn post_event(app: &Router, id: &str, event: Value) -> (StatusCode, Value) {
    call(app, "POST", &format!("/sessions/{id}/events"), Some(event)).await
}
