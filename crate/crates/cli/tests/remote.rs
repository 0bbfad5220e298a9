use std::net::SocketAddr;

use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use instructbias_cli::RemoteClient;
use instructbias_core::evalharness::{
    assemble_prompt, evaluate_task, ClientError, ClientLimits, EvalConfig, ModelClient, RunStatus,
};
use instructbias_core::fixtures::{example, instance, task};

async fn complete(headers: HeaderMap, Json(body): Json<Value>) -> (StatusCode, Json<Value>) {
    if headers.get("authorization").and_then(|v| v.to_str().ok()) != Some("Bearer secret") {
        return (StatusCode::UNAUTHORIZED, Json(json!({"error": "bad token"})));
    }
    let prompt = body["prompt"].as_str().unwrap_or_default();
    let input = prompt.rsplit("input: ").next().unwrap_or_default().trim_end_matches("\noutput:");
    (StatusCode::OK, Json(json!({"choices": [{"text": input}], "max_tokens": body["max_tokens"]})))
}

async fn broken() -> StatusCode {
    StatusCode::INTERNAL_SERVER_ERROR
}

/// Mock completion server on an ephemeral port; lives as long as the runtime.
fn serve() -> (tokio::runtime::Runtime, SocketAddr) {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let addr = listener.local_addr().unwrap();
    let app = Router::new().route("/v1/complete", post(complete)).route("/broken", post(broken));
    rt.spawn(async move { axum::serve(listener, app).await.unwrap() });
    (rt, addr)
}

fn limits() -> ClientLimits {
    ClientLimits { max_concurrent: 2, requests_per_minute: None }
}

#[test]
fn remote_round_trip() {
    let (_rt, addr) = serve();
    let url = format!("http://{addr}/v1/complete");
    let client = RemoteClient::new(&url, Some("secret".into()), limits());
    client.check_available().unwrap();
    assert_eq!(client.limits().max_concurrent, 2);

    let t = task(
        "copy",
        "Text Modification",
        "Copy the input.",
        vec![example("x", "x", "")],
        vec![],
        vec![instance("c-0", "a red kite", &["a red kite"]), instance("c-1", "two blue birds", &["two blue birds"])],
    );
    let prompt = assemble_prompt(&t, &t.instances[0]);
    assert_eq!(client.complete(&prompt, 16).unwrap(), "a red kite");

    let run = evaluate_task(&t, &client, &EvalConfig::default()).unwrap();
    assert_eq!(run.status, RunStatus::Done);
    assert_eq!(run.overall, Some(1.0));
}

#[test]
fn remote_failures() {
    let (_rt, addr) = serve();
    let missing = RemoteClient::new(format!("http://{addr}/v1/complete"), None, limits());
    assert!(matches!(missing.check_available(), Err(ClientError::Unavailable(_))));

    let wrong = RemoteClient::new(format!("http://{addr}/v1/complete"), Some("guess".into()), limits());
    assert!(matches!(wrong.complete("p", 4), Err(ClientError::Unavailable(_))));

    let broken = RemoteClient::new(format!("http://{addr}/broken"), Some("secret".into()), limits());
    assert!(matches!(broken.complete("p", 4), Err(ClientError::Request(_))));

    let scheme = RemoteClient::new("ftp://example.invalid", Some("secret".into()), limits());
    assert!(matches!(scheme.check_available(), Err(ClientError::Unavailable(_))));
}
