//! JSON-over-HTTP routes for the analysis engine.

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use instructbias_core::biasmetrics::{ComponentSelector, MetricKind};
use instructbias_core::corpus::{CategoryBasis, TaskFilter, TaskRecord};
use instructbias_core::embedspace::EmbedError;
use instructbias_core::relations::{ChordRelation, RelationError};
use instructbias_core::service::{Engine, ModifyRequest, ServiceError, SessionState};

pub type Shared = Arc<Engine>;

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    Service(ServiceError),
    Internal(String),
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError::Service(e)
    }
}

#[derive(Serialize)]
struct ErrorBody {
    error: &'static str,
    message: String,
}

fn classify(e: &ServiceError) -> (StatusCode, &'static str) {
    use ServiceError::*;
    match e {
        UnknownTask(_) => (StatusCode::NOT_FOUND, "unknown_task"),
        UnknownVersion { .. } => (StatusCode::NOT_FOUND, "unknown_version"),
        UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
        UnknownRun(_) => (StatusCode::NOT_FOUND, "unknown_run"),
        NotInSelection(_) => (StatusCode::CONFLICT, "not_in_selection"),
        ConcurrentRunExists { .. } => (StatusCode::CONFLICT, "concurrent_run_exists"),
        InvalidParameter(_) => (StatusCode::BAD_REQUEST, "invalid_parameter"),
        ClientUnavailable(_) => (StatusCode::SERVICE_UNAVAILABLE, "client_unavailable"),
        Schema(_) => (StatusCode::UNPROCESSABLE_ENTITY, "schema"),
        Corpus(_) => (StatusCode::INTERNAL_SERVER_ERROR, "corpus"),
        Embed(EmbedError::CorpusTooSmall { .. }) => (StatusCode::UNPROCESSABLE_ENTITY, "corpus_too_small"),
        Embed(EmbedError::UnknownTask(_)) => (StatusCode::NOT_FOUND, "unknown_task"),
        Embed(EmbedError::InvalidK | EmbedError::InvalidDims(_) | EmbedError::TooFewPoints(_)) => {
            (StatusCode::BAD_REQUEST, "invalid_parameter")
        }
        Embed(_) => (StatusCode::INTERNAL_SERVER_ERROR, "embedding"),
        Relation(RelationError::InvalidComponent(_)) => (StatusCode::BAD_REQUEST, "invalid_component"),
        Relation(RelationError::InvalidThreshold(_)) => (StatusCode::BAD_REQUEST, "invalid_threshold"),
        Relation(_) => (StatusCode::INTERNAL_SERVER_ERROR, "relation"),
        Metric(_) => (StatusCode::BAD_REQUEST, "metric"),
        Eval(_) => (StatusCode::BAD_REQUEST, "eval"),
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, error, message) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, "bad_request", m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, "internal", m),
            ApiError::Service(e) => {
                let (status, kind) = classify(&e);
                (status, kind, e.to_string())
            }
        };
        (status, Json(ErrorBody { error, message })).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Engine calls can be CPU-bound (projection, metrics), so they run off the
/// async workers.
async fn blocking<T, F>(engine: &Shared, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Engine) -> Result<T, ApiError> + Send + 'static,
{
    let engine = engine.clone();
    tokio::task::spawn_blocking(move || f(&engine))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map(Json)
}

fn parse_component(s: Option<&str>) -> Result<Option<ComponentSelector>, ApiError> {
    s.map(|c| ComponentSelector::parse(c).ok_or_else(|| ApiError::BadRequest(format!("unknown component `{c}`"))))
        .transpose()
}

#[derive(Deserialize)]
pub struct TasksQuery {
    #[serde(rename = "type")]
    task_type: Option<String>,
    domain: Option<String>,
    source: Option<String>,
    q: Option<String>,
}

async fn list_tasks(State(engine): State<Shared>, Query(q): Query<TasksQuery>) -> impl IntoResponse {
    let filter = TaskFilter { task_type: q.task_type, domain: q.domain, source: q.source, query: q.q };
    Json(engine.list_tasks(&filter))
}

#[derive(Deserialize)]
pub struct VersionQuery {
    version: Option<u32>,
}

async fn get_task(
    State(engine): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<VersionQuery>,
) -> ApiResult<TaskRecord> {
    Ok(Json(engine.get_task(&id, q.version)?.as_ref().clone()))
}

#[derive(Deserialize)]
pub struct OverviewQuery {
    dims: Option<usize>,
    basis: Option<String>,
}

async fn overview(State(engine): State<Shared>, Query(q): Query<OverviewQuery>) -> Result<Response, ApiError> {
    let dims = q.dims.unwrap_or(2);
    if dims != 2 && dims != 3 {
        return Err(ApiError::BadRequest(format!("dims must be 2 or 3, got {dims}")));
    }
    let basis = match q.basis.as_deref() {
        None => CategoryBasis::TaskType,
        Some(b) => CategoryBasis::parse(b).ok_or_else(|| ApiError::BadRequest(format!("unknown basis `{b}`")))?,
    };
    Ok(blocking(&engine, move |e| Ok(e.overview(dims, basis)?)).await.into_response())
}

#[derive(Deserialize)]
pub struct RootBody {
    task_id: String,
    k: Option<usize>,
}

async fn set_root(
    State(engine): State<Shared>,
    Path(sid): Path<String>,
    Json(body): Json<RootBody>,
) -> ApiResult<SessionState> {
    blocking(&engine, move |e| Ok(e.set_root_with_k(&sid, &body.task_id, body.k)?)).await
}

#[derive(Deserialize)]
pub struct ThresholdQuery {
    threshold: Option<f64>,
}

async fn correlation(
    State(engine): State<Shared>,
    Path(sid): Path<String>,
    Query(q): Query<ThresholdQuery>,
) -> Result<Response, ApiError> {
    Ok(blocking(&engine, move |e| Ok(e.correlation(&sid, q.threshold)?)).await.into_response())
}

#[derive(Deserialize)]
pub struct ChordQuery {
    relation: Option<String>,
    component: Option<String>,
    threshold: Option<f64>,
}

async fn chord(
    State(engine): State<Shared>,
    Path(sid): Path<String>,
    Query(q): Query<ChordQuery>,
) -> Result<Response, ApiError> {
    let relation = q
        .relation
        .as_deref()
        .map(|r| ChordRelation::parse(r).ok_or_else(|| ApiError::BadRequest(format!("unknown relation `{r}`"))))
        .transpose()?;
    let component = parse_component(q.component.as_deref())?;
    Ok(blocking(&engine, move |e| Ok(e.chord(&sid, relation, component, q.threshold)?)).await.into_response())
}

async fn beeswarm(State(engine): State<Shared>, Path(sid): Path<String>) -> Result<Response, ApiError> {
    Ok(blocking(&engine, move |e| Ok(e.beeswarm(&sid)?)).await.into_response())
}

#[derive(Deserialize)]
pub struct MetricsQuery {
    /// Comma-separated metric names.
    metrics: Option<String>,
    component: Option<String>,
}

async fn metrics(
    State(engine): State<Shared>,
    Path(sid): Path<String>,
    Query(q): Query<MetricsQuery>,
) -> Result<Response, ApiError> {
    let metrics = q
        .metrics
        .as_deref()
        .map(|list| {
            list.split(',')
                .filter(|m| !m.trim().is_empty())
                .map(|m| MetricKind::parse(m).map_err(|e| ApiError::BadRequest(e.to_string())))
                .collect::<Result<Vec<_>, _>>()
        })
        .transpose()?;
    if metrics.as_ref().is_some_and(|m| m.is_empty()) {
        return Err(ApiError::BadRequest("metrics list is empty".into()));
    }
    let component = parse_component(q.component.as_deref())?;
    Ok(blocking(&engine, move |e| Ok(e.metrics(&sid, metrics, component)?)).await.into_response())
}

#[derive(Serialize)]
pub struct ModifyResponse {
    version: u32,
    session: SessionState,
}

async fn modify(
    State(engine): State<Shared>,
    Path(sid): Path<String>,
    Json(req): Json<ModifyRequest>,
) -> ApiResult<ModifyResponse> {
    blocking(&engine, move |e| {
        let (version, session) = e.modify_instruction(&sid, &req)?;
        Ok(ModifyResponse { version, session })
    })
    .await
}

#[derive(Deserialize)]
pub struct EvalBody {
    task_id: String,
    limit: Option<usize>,
    client: Option<String>,
}

async fn start_eval(
    State(engine): State<Shared>,
    Path(sid): Path<String>,
    Json(body): Json<EvalBody>,
) -> Result<Response, ApiError> {
    let client = body.client.unwrap_or_else(|| "echo".to_string());
    let run = blocking(&engine, move |e| Ok(e.run_eval(&sid, &body.task_id, body.limit, &client)?)).await?;
    Ok((StatusCode::ACCEPTED, run).into_response())
}

async fn get_run(State(engine): State<Shared>, Path(run_id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(engine.get_run(&run_id)?).into_response())
}

pub fn router(engine: Shared) -> Router {
    Router::new()
        .route("/tasks", get(list_tasks))
        .route("/tasks/{id}", get(get_task))
        .route("/overview", get(overview))
        .route("/session/{sid}/root", post(set_root))
        .route("/session/{sid}/correlation", get(correlation))
        .route("/session/{sid}/chord", get(chord))
        .route("/session/{sid}/beeswarm", get(beeswarm))
        .route("/session/{sid}/metrics", get(metrics))
        .route("/session/{sid}/modify", post(modify))
        .route("/session/{sid}/eval", post(start_eval))
        .route("/eval/{run_id}", get(get_run))
        .with_state(engine)
}
