//! JSON over HTTP. Every error answers with `{code, message, details}`.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;

use crate::{AppState, ConfigPatch, EmotionInput, NewEvent, Service, ServiceError};

pub struct ApiError(pub ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            ServiceError::ValidationFailed(_) | ServiceError::NoEvents => StatusCode::BAD_REQUEST,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Infeasible(_) | ServiceError::ModelMissing(_) => StatusCode::CONFLICT,
            ServiceError::CorruptLog { .. } | ServiceError::Io(_) | ServiceError::Internal(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        if status.is_server_error() {
            log::error!("{}", self.0);
        }
        (status, Json(self.0.body())).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::ValidationFailed(format!("bad request body: {e}")))
}

/// Runs blocking work off the async executor.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/events", post(add_event))
        .route("/events/{id}", delete(remove_event))
        .route("/emotion", post(set_emotion))
        .route("/solve", post(solve))
        .route("/state", get(state))
        .route("/schedule", get(schedule))
        .route("/config", post(set_config))
        .with_state(service)
}

async fn add_event(State(s): State<Arc<Service>>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: NewEvent = parse(&body)?;
    let event = s.add_event(req)?;
    Ok((StatusCode::CREATED, Json(event)))
}

async fn remove_event(State(s): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    s.remove_event(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn set_emotion(State(s): State<Arc<Service>>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let input: EmotionInput = parse(&body)?;
    Ok(Json(blocking(move || s.set_emotion(input)).await?))
}

async fn solve(State(s): State<Arc<Service>>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(move || s.solve()).await?))
}

async fn state(State(s): State<Arc<Service>>) -> impl IntoResponse {
    Json(AppState::clone(&s.state()))
}

async fn schedule(State(s): State<Arc<Service>>) -> ApiResult<impl IntoResponse> {
    let schedule = s
        .schedule()
        .ok_or_else(|| ServiceError::NotFound("no schedule has been solved yet".into()))?;
    Ok(Json(schedule))
}

async fn set_config(State(s): State<Arc<Service>>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let patch: ConfigPatch = parse(&body)?;
    Ok(Json(s.set_config(&patch)?))
}

/// Serves the API until the process is stopped.
pub async fn serve(service: Arc<Service>, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(service)).await
}
