//! HTTP JSON API.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde_json::json;
use uuid::Uuid;

use crate::deck::Deck;
use crate::error::ServiceError;
use crate::service::{AnswerRequest, CreateSessionRequest, SessionService};

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::InvalidArgument(_) => StatusCode::BAD_REQUEST,
            ServiceError::Engine(teach_core::Error::InvalidArgument(_)) => StatusCode::BAD_REQUEST,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Gone(_) => StatusCode::GONE,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = json!({ "error": self.kind(), "message": self.to_string() });
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ServiceError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body)
        .map_err(|e| ServiceError::InvalidArgument(format!("request body: {e}")))
}

fn parse_id(id: &str) -> ApiResult<Uuid> {
    Uuid::parse_str(id).map_err(|_| ServiceError::NotFound(format!("session {id:?}")))
}

async fn create_deck(
    State(service): State<Arc<SessionService>>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let deck: Deck = parse_body(&body)?;
    let deck = service.add_deck(deck)?;
    Ok((StatusCode::CREATED, Json(deck)))
}

async fn get_deck(
    State(service): State<Arc<SessionService>>,
    Path(id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(service.deck(&id)?))
}

async fn create_session(
    State(service): State<Arc<SessionService>>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let request: CreateSessionRequest = parse_body(&body)?;
    Ok((StatusCode::CREATED, Json(service.create_session(request)?)))
}

async fn get_session(
    State(service): State<Arc<SessionService>>,
    Path(id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(service.session(parse_id(&id)?)?))
}

async fn submit_answer(
    State(service): State<Arc<SessionService>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let id = parse_id(&id)?;
    let request: AnswerRequest = parse_body(&body)?;
    Ok(Json(service.submit_answer(id, request)?))
}

async fn advance(
    State(service): State<Arc<SessionService>>,
    Path(id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(service.advance(parse_id(&id)?)?))
}

async fn gain(
    State(service): State<Arc<SessionService>>,
    Path(id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(service.gain(parse_id(&id)?)?))
}

pub fn router(service: Arc<SessionService>) -> Router {
    Router::new()
        .route("/decks", post(create_deck))
        .route("/decks/{id}", get(get_deck))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/answers", post(submit_answer))
        .route("/sessions/{id}/advance", post(advance))
        .route("/sessions/{id}/gain", get(gain))
        .with_state(service)
}

/// Serves the API until interrupted.
pub async fn serve(service: Arc<SessionService>, addr: SocketAddr) -> std::io::Result<()> {
    serve_on(service, tokio::net::TcpListener::bind(addr).await?).await
}

/// Serves the API on an already bound listener until interrupted.
pub async fn serve_on(
    service: Arc<SessionService>,
    listener: tokio::net::TcpListener,
) -> std::io::Result<()> {
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
