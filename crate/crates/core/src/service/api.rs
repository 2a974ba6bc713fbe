use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::extract::{DefaultBodyLimit, FromRequest, Multipart, Path, Query, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::{Any, CorsLayer};

use super::{process_session, AppState, JobRequest, JobState, SessionFlags};
use crate::corpus::{frequency_table, parse_transcript, Corpus, SpeakerRules};
use crate::error::Error;
use crate::pipeline::{Method, RunArtifacts};

const UPLOAD_LIMIT: usize = 64 * 1024 * 1024;

#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self(status, message.into())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e.root() {
            Error::EmptyTranscript | Error::InvalidArgument(_) | Error::Format(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState) -> Router {
    let cors = match state.config().cors_origin.as_deref().map(HeaderValue::from_str) {
        Some(Ok(origin)) => CorsLayer::new().allow_origin(origin),
        _ => CorsLayer::new().allow_origin(Any),
    }
    .allow_methods(Any)
    .allow_headers(Any);
    Router::new()
        .route("/api/health", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/api/corpus", post(upload))
        .route("/api/corpus/{id}/preprocess", post(preprocess))
        .route("/api/corpus/{id}/frequencies", get(frequencies))
        .route("/api/corpus/{id}/models", post(submit))
        .route("/api/jobs/{id}", get(job))
        .route("/api/models/{id}/graph", get(graph))
        .route("/api/models/{id}/metrics", get(metrics))
        .route("/api/models/{id}/topics", get(topics))
        .route("/api/models/{id}/keywords/{lemma}/citations", get(citations))
        .layer(DefaultBodyLimit::max(UPLOAD_LIMIT))
        .layer(cors)
        .with_state(state)
}

fn is_text_type(ct: &str) -> bool {
    let ct = ct.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
    ct.starts_with("text/") || ct == "application/octet-stream"
}

fn decode(bytes: &[u8]) -> ApiResult<String> {
    String::from_utf8(bytes.to_vec())
        .map_err(|_| ApiError::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, "uploads must be UTF-8 text"))
}

async fn upload(State(state): State<AppState>, request: Request) -> ApiResult<Response> {
    let content_type = request
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
        .to_string();
    let mut files: Vec<(String, String)> = Vec::new();
    if content_type.starts_with("multipart/form-data") {
        let mut form = Multipart::from_request(request, &())
            .await
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.body_text()))?;
        while let Some(field) = form
            .next_field()
            .await
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.body_text()))?
        {
            if let Some(ct) = field.content_type() {
                if !is_text_type(ct) {
                    return Err(ApiError::new(
                        StatusCode::UNSUPPORTED_MEDIA_TYPE,
                        format!("unsupported part type {ct}"),
                    ));
                }
            }
            let name = field
                .file_name()
                .or(field.name())
                .map(str::to_string)
                .unwrap_or_default();
            let bytes = field
                .bytes()
                .await
                .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.body_text()))?;
            files.push((name, decode(&bytes)?));
        }
    } else {
        let bytes = to_bytes(request.into_body(), UPLOAD_LIMIT)
            .await
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
        if bytes.is_empty() {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, "empty upload"));
        }
        if !content_type.is_empty() && !is_text_type(&content_type) {
            return Err(ApiError::new(
                StatusCode::UNSUPPORTED_MEDIA_TYPE,
                format!("unsupported content type {content_type}"),
            ));
        }
        files.push(("upload".to_string(), decode(&bytes)?));
    }
    files.retain(|(_, text)| !text.trim().is_empty());
    if files.is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "empty upload"));
    }
    let rules = SpeakerRules::default();
    let mut documents = Vec::with_capacity(files.len());
    for (i, (name, text)) in files.iter().enumerate() {
        let id = if name.is_empty() || files[..i].iter().any(|(n, _)| n == name) {
            format!("document_{i}")
        } else {
            name.clone()
        };
        documents.push(parse_transcript(&id, text, &rules)?);
    }
    let count = documents.len();
    let corpus = Corpus::new("en", documents)?;
    let id = state.add_corpus(corpus)?;
    Ok((StatusCode::CREATED, Json(json!({ "corpus_id": id, "documents": count }))).into_response())
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct PreprocessBody {
    keep_interviewer: bool,
    extra_stopwords: Vec<String>,
}

#[derive(Debug, Serialize)]
struct SessionView {
    corpus_id: String,
    flags: SessionFlags,
    documents: usize,
    sentences: usize,
    keep_interviewer: bool,
    extra_stopwords: Vec<String>,
}

fn not_found(what: &str, id: &str) -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, format!("unknown {what} {id}"))
}

async fn preprocess(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Option<Json<PreprocessBody>>,
) -> ApiResult<Json<SessionView>> {
    let body = body.map(|b| b.0).unwrap_or_default();
    let mut reg = state.registry();
    let session = reg.sessions.get_mut(&id).ok_or_else(|| not_found("corpus", &id))?;
    session.keep_interviewer = body.keep_interviewer;
    session.extra_stopwords = body.extra_stopwords;
    process_session(session)?;
    state.shared.store.save_session(&session.record(&id))?;
    let processed = session.processed.as_ref().expect("just processed");
    Ok(Json(SessionView {
        corpus_id: id,
        flags: session.flags,
        documents: processed.documents.len(),
        sentences: processed.modeled_sentences().len(),
        keep_interviewer: session.keep_interviewer,
        extra_stopwords: session.extra_stopwords.clone(),
    }))
}

#[derive(Debug, Deserialize)]
struct FrequencyQuery {
    limit: Option<usize>,
}

#[derive(Debug, Serialize)]
struct FrequencyRow {
    lemma: String,
    count: usize,
}

async fn frequencies(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<FrequencyQuery>,
) -> ApiResult<Json<Vec<FrequencyRow>>> {
    let reg = state.registry();
    let session = reg.sessions.get(&id).ok_or_else(|| not_found("corpus", &id))?;
    let corpus = session
        .processed
        .as_ref()
        .ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "corpus is not preprocessed"))?;
    Ok(Json(
        frequency_table(corpus, q.limit.unwrap_or(50))
            .into_iter()
            .map(|(lemma, count)| FrequencyRow { lemma, count })
            .collect(),
    ))
}

fn parse_request(body: &Value) -> Result<JobRequest, ApiError> {
    let invalid = |m: String| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, m);
    let method = body
        .get("method")
        .and_then(Value::as_str)
        .ok_or_else(|| invalid("method is required".into()))?
        .parse::<Method>()
        .map_err(|e| invalid(e.to_string()))?;
    let num_topics = match body.get("num_topics") {
        None => 10,
        Some(v) => v
            .as_u64()
            .filter(|&n| n >= 1)
            .ok_or_else(|| invalid("num_topics must be a positive integer".into()))? as usize,
    };
    let seed = match body.get("seed") {
        None => 0,
        Some(v) => v
            .as_u64()
            .ok_or_else(|| invalid("seed must be a non-negative integer".into()))?,
    };
    Ok(JobRequest {
        method,
        num_topics,
        seed,
    })
}

async fn submit(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<Value>,
) -> ApiResult<Response> {
    let corpus = {
        let reg = state.registry();
        let session = reg.sessions.get(&id).ok_or_else(|| not_found("corpus", &id))?;
        let request = parse_request(&body)?;
        let corpus = session
            .processed
            .clone()
            .filter(|_| session.flags.lemmatized)
            .ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "corpus is not preprocessed"))?;
        (corpus, request)
    };
    let job_id = state.enqueue(&id, corpus.0, corpus.1)?;
    Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": job_id }))).into_response())
}

async fn job(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<super::Job>> {
    state.job(&id).map(Json).ok_or_else(|| not_found("job", &id))
}

fn finished_artifacts(state: &AppState, id: &str) -> ApiResult<Arc<RunArtifacts>> {
    let reg = state.registry();
    let model = reg.models.get(id).ok_or_else(|| not_found("model", id))?;
    match (&model.job.state, &model.artifacts) {
        (JobState::Done, Some(a)) => Ok(a.clone()),
        (JobState::Failed, _) => Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("job failed: {}", model.job.error.clone().unwrap_or_default()),
        )),
        (s, _) => Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("job is {}", s.as_str()),
        )),
    }
}

fn json_body(body: &str) -> Response {
    (
        [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))],
        Body::from(body.to_string()),
    )
        .into_response()
}

async fn graph(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(json_body(&finished_artifacts(&state, &id)?.graph))
}

async fn metrics(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(json_body(&finished_artifacts(&state, &id)?.metrics))
}

async fn topics(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(json_body(&finished_artifacts(&state, &id)?.topics))
}

async fn citations(
    State(state): State<AppState>,
    Path((id, lemma)): Path<(String, String)>,
) -> ApiResult<Response> {
    let index = {
        let reg = state.registry();
        let model = reg.models.get(&id).ok_or_else(|| not_found("model", &id))?;
        model.citations.clone()
    };
    let body = serde_json::to_string(index.get(&lemma)).map_err(Error::from)?;
    Ok(json_body(&body))
}
