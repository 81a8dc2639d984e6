use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use resched_core::model::Format;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::api::{ApiError, RequestDoc, Service};

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status_code()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.body())).into_response()
    }
}

#[derive(Debug, Deserialize)]
pub struct FormatQuery {
    format: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnswerDoc {
    pub answer: String,
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/instances", post(create_instance))
        .route("/instances/{id}", get(get_instance))
        .route("/instances/{id}/baseline", post(solve_baseline))
        .route("/instances/{id}/sessions", post(open_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/answers", post(answer))
        .route("/sessions/{id}/result", get(get_result))
        .route("/sessions/{id}/transcript", get(transcript))
        .with_state(service)
}

/// Runs a store-touching operation off the async workers.
async fn blocking<T, F>(service: Arc<Service>, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Service) -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&service))
        .await
        .unwrap_or_else(|e| Err(ApiError::Unprocessable(format!("handler failed: {e}"))))
}

fn json_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest {
        message: format!("malformed request body: {e}"),
        detail: None,
    })
}

async fn create_instance(
    State(svc): State<Arc<Service>>,
    Query(q): Query<FormatQuery>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let format: Format = q
        .format
        .as_deref()
        .unwrap_or("native")
        .parse()
        .map_err(|message: String| ApiError::BadRequest { message, detail: None })?;
    let text = String::from_utf8(body.to_vec()).map_err(|_| ApiError::BadRequest {
        message: "instance document must be UTF-8".into(),
        detail: None,
    })?;
    let view = blocking(svc, move |s| s.create_instance(&text, format)).await?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_instance(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(blocking(svc, move |s| s.get_instance(&id)).await?))
}

async fn solve_baseline(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(blocking(svc, move |s| s.solve_baseline(&id)).await?))
}

async fn open_session(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let doc: RequestDoc = json_body(&body)?;
    let view = blocking(svc, move |s| s.open_session(&id, &doc)).await?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(blocking(svc, move |s| s.get_session(&id)).await?))
}

async fn answer(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let doc: AnswerDoc = json_body(&body)?;
    Ok(Json(blocking(svc, move |s| s.answer(&id, &doc.answer)).await?))
}

async fn get_result(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(blocking(svc, move |s| s.get_result(&id)).await?))
}

async fn transcript(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let text = blocking(svc, move |s| s.transcript(&id)).await?;
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], text))
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(service: Arc<Service>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
