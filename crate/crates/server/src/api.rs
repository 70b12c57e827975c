//! JSON-over-HTTP routes.
//!
//! ```text
//! POST /sessions                                    {condition}
//! POST /sessions/{id}/ideations                     {prompt_id, text, iteration}
//! GET  /sessions/{id}/ideations/{iid}/feedback      ?score=diversity|quality&compare=t
//! GET  /health
//! ```

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ideafeed_core::feedback::{FeedbackEngine, Submission};
use ideafeed_core::{Error, ScoreKind};
use serde::Deserialize;
use serde_json::json;
use tower_http::cors::{Any, CorsLayer};

pub enum ApiError {
    Engine(Error),
    Internal(String),
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self::Engine(e)
    }
}

pub fn status_of(e: &Error) -> StatusCode {
    match e {
        Error::NotFound(_) => StatusCode::NOT_FOUND,
        Error::InvalidCondition(_) | Error::InvalidConfig(_) => StatusCode::BAD_REQUEST,
        Error::IterationOutOfOrder { .. } | Error::PromptsExhausted => StatusCode::CONFLICT,
        Error::TextTooLong(_) => StatusCode::PAYLOAD_TOO_LARGE,
        Error::CompareUnavailable(_) | Error::LineageMismatch => StatusCode::UNPROCESSABLE_ENTITY,
        e if e.is_dependency() => StatusCode::SERVICE_UNAVAILABLE,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            Self::Engine(e) => (status_of(&e), json!({"error": e.code(), "message": e.to_string()})),
            Self::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, json!({"error": "internal", "message": m})),
        };
        (status, Json(body)).into_response()
    }
}

type Engine = Arc<FeedbackEngine>;

/// Run CPU-bound engine work off the async executor.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> ideafeed_core::Result<T> + Send + 'static,
    T: Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ApiError::Engine),
        Err(e) => Err(ApiError::Internal(format!("worker failed: {e}"))),
    }
}

#[derive(Deserialize)]
struct NewSession {
    condition: String,
}

async fn create_session(State(engine): State<Engine>, Json(req): Json<NewSession>) -> Result<Response, ApiError> {
    let info = blocking(move || engine.create_session(&req.condition)).await?;
    Ok((StatusCode::CREATED, Json(info)).into_response())
}

async fn submit(
    State(engine): State<Engine>,
    Path(session): Path<String>,
    Json(sub): Json<Submission>,
) -> Result<Response, ApiError> {
    let resp = blocking(move || engine.submit(&session, &sub)).await?;
    Ok(Json(resp).into_response())
}

#[derive(Deserialize)]
struct FeedbackQuery {
    score: Option<String>,
    compare: Option<u32>,
}

async fn feedback(
    State(engine): State<Engine>,
    Path((session, record)): Path<(String, String)>,
    Query(q): Query<FeedbackQuery>,
) -> Result<Response, ApiError> {
    let kind: ScoreKind = q.score.as_deref().map(str::parse).transpose()?.unwrap_or_default();
    let resp = blocking(move || engine.feedback(&session, &record, kind, q.compare)).await?;
    Ok(Json(resp).into_response())
}

async fn health(State(engine): State<Engine>) -> Response {
    Json(engine.health()).into_response()
}

pub fn router(engine: Engine) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers(Any);
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/ideations", post(submit))
        .route("/sessions/{id}/ideations/{iid}/feedback", get(feedback))
        .route("/health", get(health))
        .layer(cors)
        .with_state(engine)
}

/// Serve until ctrl-c.
pub async fn serve(engine: Engine, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
