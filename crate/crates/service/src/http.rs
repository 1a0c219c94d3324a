use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use civility_core::panels::PanelId;
use civility_core::simulant::{Persona, Transcript};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::export::ExportFilter;
use crate::{CreateRequest, Service, ServiceError, SurveyResponse};

/// A [`ServiceError`] rendered as `{"code", "message"}`.
#[derive(Debug)]
pub struct ApiError(pub ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

#[derive(Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let body = ErrorBody { code: self.0.code().to_string(), message: self.0.to_string() };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError(ServiceError::InvalidRequest(e.to_string())))
}

/// Runs a blocking service call off the async workers.
async fn run<T, F>(svc: &Arc<Service>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Service) -> Result<T, ServiceError> + Send + 'static,
{
    let svc = svc.clone();
    tokio::task::spawn_blocking(move || f(&svc))
        .await
        .map_err(|e| ApiError(ServiceError::Storage(format!("worker failed: {e}"))))?
        .map_err(ApiError)
}

async fn create_session(State(svc): State<Arc<Service>>, body: Bytes) -> ApiResult<Response> {
    let req: CreateRequest =
        if body.iter().all(u8::is_ascii_whitespace) { CreateRequest::default() } else { parse(&body)? };
    let view = run(&svc, move |s| {
        let id = s.create_session(req)?.id;
        s.view(&id)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn get_session(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(run(&svc, move |s| s.view(&id)).await?).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MessageBody {
    text: String,
}

async fn post_message(State(svc): State<Arc<Service>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let MessageBody { text } = parse(&body)?;
    Ok(Json(run(&svc, move |s| s.post_message(&id, &text)).await?).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RatingBody {
    panel: PanelId,
    score: i64,
}

async fn post_rating(State(svc): State<Arc<Service>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let RatingBody { panel, score } = parse(&body)?;
    Ok(Json(run(&svc, move |s| s.post_rating(&id, panel, score)).await?).into_response())
}

async fn post_survey(State(svc): State<Arc<Service>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let response: SurveyResponse = parse(&body)?;
    Ok(Json(run(&svc, move |s| s.post_survey(&id, response)).await?).into_response())
}

#[derive(Serialize)]
struct StageTranscript {
    stage: usize,
    persona: Persona,
    closed: bool,
    turns: Transcript,
}

#[derive(Serialize)]
struct TranscriptView {
    session_id: String,
    stages: Vec<StageTranscript>,
}

async fn get_transcript(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<Response> {
    let s = run(&svc, move |s| s.session(&id)).await?;
    let mut stages: Vec<StageTranscript> = s
        .finished
        .iter()
        .enumerate()
        .map(|(i, t)| StageTranscript {
            stage: i + 1,
            persona: s.flow.stages()[i].persona,
            closed: true,
            turns: t.clone(),
        })
        .collect();
    if !s.complete {
        stages.push(StageTranscript {
            stage: s.stage_index + 1,
            persona: s.stage().persona,
            closed: s.conversation.is_closed(),
            turns: s.conversation.transcript().clone(),
        });
    }
    Ok(Json(TranscriptView { session_id: s.id, stages }).into_response())
}

async fn export(
    State(svc): State<Arc<Service>>,
    filter: Result<Query<ExportFilter>, QueryRejection>,
) -> ApiResult<Response> {
    let Query(filter) = filter.map_err(|e| ApiError(ServiceError::InvalidRequest(e.body_text())))?;
    let records = run(&svc, move |s| s.export(&filter)).await?;
    let mut body = String::new();
    for r in &records {
        body.push_str(&serde_json::to_string(r).map_err(|e| ApiError(ServiceError::Storage(e.to_string())))?);
        body.push('\n');
    }
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

async fn not_found() -> ApiError {
    ApiError(ServiceError::NotFound("route".into()))
}

/// HTTP routes; unmatched paths fall through to `static_dir` when given.
pub fn router(svc: Arc<Service>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/sessions/{id}/ratings", post(post_rating))
        .route("/sessions/{id}/surveys", post(post_survey))
        .route("/sessions/{id}/transcript", get(get_transcript))
        .route("/export", get(export))
        .with_state(svc);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(not_found),
    }
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    router: Router,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router).with_graceful_shutdown(shutdown).await
}
