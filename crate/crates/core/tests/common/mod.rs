#![allow(dead_code)]

use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use tmgraph::fixtures::{planted, PlantedSpec};
use tmgraph::service::JobState;

pub const BOUNDARY: &str = "tmgraph-test-boundary";

/// Multipart form with one `files` part per `(file name, text)`.
pub fn multipart_body(files: &[(&str, &str)], content_type: &str) -> Vec<u8> {
    let mut body = Vec::new();
    for (name, text) in files {
        body.extend_from_slice(
            format!(
                "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"files\"; filename=\"{name}\"\r\nContent-Type: {content_type}\r\n\r\n"
            )
            .as_bytes(),
        );
        body.extend_from_slice(text.as_bytes());
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    body
}

pub fn upload_request(files: &[(&str, &str)]) -> Request<Body> {
    Request::builder()
        .method(Method::POST)
        .uri("/api/corpus")
        .header(header::CONTENT_TYPE, format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(multipart_body(files, "text/plain")))
        .unwrap()
}

pub fn json_request(method: Method, uri: &str, body: Option<Value>) -> Request<Body> {
    let builder = Request::builder().method(method).uri(uri);
    match body {
        Some(v) => builder
            .header(header::CONTENT_TYPE, "application/json")
            .body(Body::from(v.to_string()))
            .unwrap(),
        None => builder.body(Body::empty()).unwrap(),
    }
}

pub async fn send(app: &Router, request: Request<Body>) -> (StatusCode, Vec<u8>) {
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, bytes.to_vec())
}

pub async fn send_json(app: &Router, request: Request<Body>) -> (StatusCode, Value) {
    let (status, bytes) = send(app, request).await;
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or(Value::Null)
    };
    (status, value)
}

pub async fn get(app: &Router, uri: &str) -> (StatusCode, Vec<u8>) {
    send(app, json_request(Method::GET, uri, None)).await
}

/// Uploads, preprocesses with default flags, and returns the corpus id.
pub async fn prepared_corpus(app: &Router, files: &[(&str, &str)]) -> String {
    let (status, body) = send_json(app, upload_request(files)).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    let id = body["corpus_id"].as_str().unwrap().to_string();
    let (status, body) = send_json(app, json_request(Method::POST, &format!("/api/corpus/{id}/preprocess"), None)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    id
}

pub async fn submit(app: &Router, corpus: &str, body: Value) -> (StatusCode, Value) {
    send_json(
        app,
        json_request(Method::POST, &format!("/api/corpus/{corpus}/models"), Some(body)),
    )
    .await
}

/// Polls a job until it is terminal, returning every state observed.
pub async fn poll_until_terminal(app: &Router, job: &str) -> Vec<JobState> {
    let mut seen = Vec::new();
    for _ in 0..12_000 {
        let (status, body) = get(app, &format!("/api/jobs/{job}")).await;
        assert_eq!(status, StatusCode::OK);
        let value: Value = serde_json::from_slice(&body).unwrap();
        let state: JobState = serde_json::from_value(value["state"].clone()).unwrap();
        seen.push(state);
        if state.is_terminal() {
            return seen;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    panic!("job {job} did not finish");
}

/// The planted four-topic fixture: 200 respondent sentences in 10 documents.
pub fn planted_files() -> Vec<(String, String)> {
    planted(PlantedSpec::default()).documents
}

pub fn small_planted_files() -> Vec<(String, String)> {
    planted(PlantedSpec {
        topics: 2,
        words_per_topic: 12,
        sentences_per_topic: 15,
        documents: 3,
        ..PlantedSpec::default()
    })
    .documents
}

pub fn as_refs(files: &[(String, String)]) -> Vec<(&str, &str)> {
    files.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect()
}
