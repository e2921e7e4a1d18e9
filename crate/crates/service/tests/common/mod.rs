#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use kgpilot_core::embedding::HashEmbedder;
use kgpilot_core::graph::{import_str, GraphStore, KnowledgeGraph};
use kgpilot_core::llm::{Gateway, LlmProvider, ScriptedProvider};
use kgpilot_core::pipeline::{FixedClock, Pipeline, PipelineConfig};
use kgpilot_service::{router, AppState};
use serde_json::Value;
use tower::ServiceExt;

pub const EX1: &str = "Is word embedding a prerequisite for understanding BERT?";

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn nlp_graph() -> KnowledgeGraph {
    import_str(&std::fs::read_to_string(fixtures_dir().join("nlp_graph.agraph")).unwrap()).unwrap()
}

pub fn script() -> Arc<ScriptedProvider> {
    Arc::new(ScriptedProvider::from_file(&fixtures_dir().join("pipeline_script.json")).unwrap())
}

pub fn state(provider: Arc<dyn LlmProvider>, graph: KnowledgeGraph) -> Arc<AppState> {
    let pipeline = Pipeline::new(
        Gateway::new(provider),
        Arc::new(HashEmbedder::default()),
        PipelineConfig::default(),
    )
    .with_clock(Arc::new(FixedClock(0)));
    Arc::new(AppState::new(pipeline, GraphStore::new(graph)).with_clock(Arc::new(FixedClock(1_700_000_000_000))))
}

pub fn app(provider: Arc<dyn LlmProvider>, graph: KnowledgeGraph) -> (Router, Arc<AppState>) {
    let s = state(provider, graph);
    (router(s.clone()), s)
}

pub async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let body = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, body)
}

pub async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

pub async fn post_json(app: &Router, uri: &str, body: &Value) -> (StatusCode, Value) {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    send(app, req).await
}

pub async fn post_raw(app: &Router, uri: &str, content_type: &str, body: &str) -> (StatusCode, Value) {
    let req = Request::post(uri)
        .header("content-type", content_type)
        .body(Body::from(body.to_string()))
        .unwrap();
    send(app, req).await
}
