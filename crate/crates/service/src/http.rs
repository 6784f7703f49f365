//! JSON HTTP API used by the review console.

use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use jobdup_core::pipeline::MatchDecision;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::app::{App, QueueStatus, Verdict};
use crate::error::ServiceError;

const DEFAULT_PAGE: usize = 50;
const MAX_PAGE: usize = 500;

pub struct ApiError(ServiceError);

impl<E: Into<ServiceError>> From<E> for ApiError {
    fn from(e: E) -> Self {
        ApiError(e.into())
    }
}

fn status_of(e: &ServiceError) -> StatusCode {
    use jobdup_core::Error as Core;
    match e {
        ServiceError::NotFound(_) | ServiceError::Core(Core::NotFound(_)) => StatusCode::NOT_FOUND,
        ServiceError::BadRequest(_) | ServiceError::Core(Core::Invalid(_) | Core::Json(_)) => StatusCode::BAD_REQUEST,
        ServiceError::Conflict(_) => StatusCode::CONFLICT,
        ServiceError::Core(Core::ScoringUnavailable(_)) => StatusCode::SERVICE_UNAVAILABLE,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = status_of(&self.0);
        if status.is_server_error() {
            log::error!("{}", self.0);
        }
        (status, Json(json!({ "error": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Runs blocking store work off the async executor.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(ServiceError::Config(format!("worker task failed: {e}"))))?
        .map_err(ApiError)
}

pub fn router(app: Arc<App>) -> Router {
    Router::new()
        .route("/postings", post(ingest))
        .route("/postings/{id}/duplicates", get(duplicates))
        .route("/review/queue", get(queue))
        .route("/review/{id_a}/{id_b}", post(review))
        .route("/stats", get(stats))
        .route("/config", get(config))
        .fallback(|| async { ApiError(ServiceError::NotFound("no such endpoint".into())) })
        .with_state(app)
}

#[derive(Deserialize)]
struct IngestParams {
    /// Dedup the accepted postings before answering.
    #[serde(default)]
    dedup: bool,
}

async fn ingest(State(app): State<Arc<App>>, Query(params): Query<IngestParams>, body: String) -> ApiResult<Value> {
    let result = blocking(move || {
        let report = app.ingest_body(&body)?;
        let dedup = if params.dedup { Some(app.dedup_pending()?) } else { None };
        Ok(json!({ "ingest": report, "dedup": dedup }))
    })
    .await?;
    Ok(Json(result))
}

#[derive(Deserialize)]
struct DuplicatesParams {
    #[serde(default)]
    all: bool,
}

async fn duplicates(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
    Query(params): Query<DuplicatesParams>,
) -> ApiResult<Value> {
    let decisions: Vec<MatchDecision> = app.decisions_for(&id, params.all)?;
    Ok(Json(json!({ "posting_id": id, "decisions": decisions })))
}

#[derive(Deserialize)]
struct QueueParams {
    #[serde(default)]
    status: Option<String>,
    limit: Option<usize>,
    after_a: Option<String>,
    after_b: Option<String>,
}

async fn queue(State(app): State<Arc<App>>, Query(params): Query<QueueParams>) -> ApiResult<Value> {
    let status = match params.status.as_deref() {
        None => QueueStatus::default(),
        Some(s) => serde_json::from_value(Value::String(s.to_owned()))
            .map_err(|_| ServiceError::BadRequest(format!("unknown status `{s}`")))?,
    };
    let limit = params.limit.unwrap_or(DEFAULT_PAGE).clamp(1, MAX_PAGE);
    let after = match (params.after_a, params.after_b) {
        (Some(a), Some(b)) => Some((a, b)),
        (None, None) => None,
        _ => return Err(ServiceError::BadRequest("after_a and after_b go together".into()).into()),
    };
    Ok(Json(serde_json::to_value(app.queue(status, limit, after)).expect("page serializes")))
}

#[derive(Deserialize)]
struct ReviewBody {
    verdict: Verdict,
    reviewer: String,
}

async fn review(
    State(app): State<Arc<App>>,
    Path((id_a, id_b)): Path<(String, String)>,
    body: String,
) -> ApiResult<MatchDecision> {
    let parsed: ReviewBody = serde_json::from_str(&body).map_err(|e| {
        ServiceError::BadRequest(format!("expected {{\"verdict\": \"confirmed\"|\"rejected\", \"reviewer\": ...}}: {e}"))
    })?;
    let decision = blocking(move || app.review(&id_a, &id_b, parsed.verdict, &parsed.reviewer)).await?;
    Ok(Json(decision))
}

async fn stats(State(app): State<Arc<App>>) -> ApiResult<Value> {
    Ok(Json(serde_json::to_value(app.stats()).expect("stats serialize")))
}

async fn config(State(app): State<Arc<App>>) -> ApiResult<Value> {
    Ok(Json(serde_json::to_value(app.thresholds()).expect("config serializes")))
}

/// Serves until ctrl-c, running a dedup over newly ingested postings every
/// `dedup_interval_secs` when that is non-zero.
pub async fn serve(app: Arc<App>) -> Result<(), ServiceError> {
    let listen = app.config().listen.clone();
    let interval = app.config().dedup_interval_secs;
    if interval > 0 {
        let worker = app.clone();
        tokio::spawn(async move {
            let mut ticker = tokio::time::interval(Duration::from_secs(interval));
            ticker.tick().await;
            loop {
                ticker.tick().await;
                let app = worker.clone();
                if app.pending() == 0 {
                    continue;
                }
                match tokio::task::spawn_blocking(move || app.dedup_pending()).await {
                    Ok(Ok(_)) => {}
                    Ok(Err(e)) => log::error!("periodic dedup failed: {e}"),
                    Err(e) => log::error!("periodic dedup panicked: {e}"),
                }
            }
        });
    }
    let listener = tokio::net::TcpListener::bind(&listen)
        .await
        .map_err(|e| ServiceError::Config(format!("cannot listen on {listen}: {e}")))?;
    log::info!("listening on {listen}");
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| ServiceError::Config(format!("server error: {e}")))
}
