use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use instructbias_cli::http::router;
use instructbias_core::embedspace::TfIdfProvider;
use instructbias_core::evalharness::EvalConfig;
use instructbias_core::fixtures::synthetic_corpus;
use instructbias_core::service::{Engine, EngineConfig};

fn app() -> Router {
    let config = EngineConfig {
        eval: EvalConfig { backoff: Duration::from_millis(1), ..EvalConfig::default() },
        ..EngineConfig::with_seed(3)
    };
    let engine = Engine::new(synthetic_corpus(12, 6, 3), Box::new(TfIdfProvider::new(3)), config).unwrap();
    router(Arc::new(engine))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, value)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Method::GET, uri, None).await
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, Method::POST, uri, Some(body)).await
}

#[tokio::test]
async fn task_listing_and_lookup() {
    let app = app();
    let (status, all) = get(&app, "/tasks").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(all.as_array().unwrap().len(), 12);

    let (_, filtered) = get(&app, "/tasks?type=Text%20Modification").await;
    let filtered = filtered.as_array().unwrap();
    assert!(!filtered.is_empty() && filtered.len() < 12);
    assert!(filtered.iter().all(|t| t["task_type"] == "Text Modification"));

    let (status, task) = get(&app, "/tasks/task002").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(task["task_id"], "task002");
    assert_eq!(task["version"], 0);
    assert!(task["definition"].is_string());

    let (status, err) = get(&app, "/tasks/nope").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["error"], "unknown_task");
    let (status, _) = get(&app, "/tasks/task002?version=4").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn overview_projection() {
    let app = app();
    let (status, o) = get(&app, "/overview?dims=3&basis=domain").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(o["dims"], 3);
    let points = o["points"].as_array().unwrap();
    assert_eq!(points.len(), 12);
    assert_eq!(points[0]["coords"].as_array().unwrap().len(), 3);
    let (status, _) = get(&app, "/overview?dims=5").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = get(&app, "/overview?basis=colour").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn session_panels() {
    let app = app();
    let (status, _) = get(&app, "/session/s/correlation").await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, s) = post(&app, "/session/s/root", json!({"task_id": "task001"})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(s["root"]["task_id"], "task001");
    assert_eq!(s["ranking"]["neighbors"].as_array().unwrap().len(), 9);

    let (status, g) = get(&app, "/session/s/correlation?threshold=0.2").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(g["kind"], "CORRELATION");
    assert_eq!(g["body"]["nodes"].as_array().unwrap().len(), 10);
    let (status, _) = get(&app, "/session/s/correlation?threshold=abc").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, c) =
        get(&app, "/session/s/chord?relation=NORM_WORD_OVERLAP&component=positive_examples&threshold=0.6").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(c["body"]["values"].as_array().unwrap().len(), 10);
    assert_eq!(c["body"]["threshold"], 0.6);
    let (status, e) = get(&app, "/session/s/chord?component=instance:task001-0").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(e["error"], "invalid_component");
    let (status, _) = get(&app, "/session/s/chord?threshold=1.5").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, m) = get(&app, "/session/s/metrics?metrics=unique_vocab,jaccard:word&component=definition").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(m["body"]["tasks"].as_array().unwrap().len(), 10);
    assert_eq!(m["body"]["tasks"][0]["values"].as_array().unwrap().len(), 2);
    let (status, _) = get(&app, "/session/s/metrics?metrics=bogus").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, b) = get(&app, "/session/s/beeswarm").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(b["body"]["columns"].as_array().unwrap().len(), 10);

    let (status, _) = post(&app, "/session/s/root", json!({"task_id": "missing"})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (_, again) = get(&app, "/session/s/beeswarm").await;
    assert_eq!(again["root"]["task_id"], "task001");
}

#[tokio::test]
async fn modify_then_eval() {
    let app = app();
    post(&app, "/session/a/root", json!({"task_id": "task004"})).await;

    let (status, err) = post(&app, "/session/a/modify", json!({"task_id": "task004", "definition": "  "})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["error"], "schema");

    let (status, m) =
        post(&app, "/session/a/modify", json!({"task_id": "task004", "definition": "Say something new."})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(m["version"], 1);
    assert_eq!(m["session"]["root"]["version"], 1);
    let (_, v0) = get(&app, "/tasks/task004?version=0").await;
    let (_, v1) = get(&app, "/tasks/task004").await;
    assert_ne!(v0, v1);

    let (status, run) = post(&app, "/session/a/eval", json!({"task_id": "task004", "limit": 4, "client": "echo"})).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let run_id = run["run_id"].as_str().unwrap().to_string();
    let mut done = Value::Null;
    for _ in 0..200 {
        let (status, r) = get(&app, &format!("/eval/{run_id}")).await;
        assert_eq!(status, StatusCode::OK);
        if r["status"] == "DONE" {
            done = r;
            break;
        }
        tokio::time::sleep(Duration::from_millis(25)).await;
    }
    assert_eq!(done["status"], "DONE");
    assert_eq!(done["version"], 1);
    assert_eq!(done["scores"].as_array().unwrap().len(), 4);

    let (status, e) = post(&app, "/session/a/eval", json!({"task_id": "task004", "limit": 1, "client": "gpt"})).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(e["error"], "client_unavailable");
    let (status, _) = get(&app, "/eval/run-424242").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}
