use std::str::FromStr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use safe_core::cert::Token;
use safe_core::store::{CertStore, DeleteRequest, StoreError};
use serde_json::json;
use tracing::{debug, warn};

use crate::DELETE_HEADER;

type Store = Arc<dyn CertStore>;

pub(crate) fn status_for(code: &str) -> StatusCode {
    match code {
        "not_found" => StatusCode::NOT_FOUND,
        "payload_too_large" => StatusCode::PAYLOAD_TOO_LARGE,
        "unauthorized" | "foreign_overwrite" => StatusCode::FORBIDDEN,
        "stale_request" => StatusCode::CONFLICT,
        "bad_token" | "bad_request" => StatusCode::BAD_REQUEST,
        "corrupt" | "io" => StatusCode::INTERNAL_SERVER_ERROR,
        "transport" => StatusCode::BAD_GATEWAY,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

fn error(code: &str, message: impl ToString) -> Response {
    (status_for(code), Json(json!({ "error": code, "message": message.to_string() }))).into_response()
}

fn store_error(e: StoreError) -> Response {
    error(e.code(), e)
}

fn parse_token(s: &str) -> Result<Token, Response> {
    Token::from_str(s).map_err(|_| error("bad_token", format!("`{s}` is not a token")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    tokio::task::spawn_blocking(f).await.expect("store task panicked")
}

async fn put_set(State(store): State<Store>, Path(token): Path<String>, body: Bytes) -> Response {
    let token = match parse_token(&token) {
        Ok(t) => t,
        Err(r) => return r,
    };
    let len = body.len();
    match blocking(move || store.put(&token, &body)).await {
        Ok(()) => {
            debug!(%token, len, "stored");
            StatusCode::CREATED.into_response()
        }
        Err(e) => {
            warn!(%token, code = e.code(), "put rejected");
            store_error(e)
        }
    }
}

async fn get_set(State(store): State<Store>, Path(token): Path<String>) -> Response {
    let token = match parse_token(&token) {
        Ok(t) => t,
        Err(r) => return r,
    };
    match blocking(move || store.fetch(&token)).await {
        Ok(bytes) => ([("content-type", "application/octet-stream")], bytes).into_response(),
        Err(e) => store_error(e),
    }
}

async fn delete_set(State(store): State<Store>, Path(token): Path<String>, headers: HeaderMap) -> Response {
    let token = match parse_token(&token) {
        Ok(t) => t,
        Err(r) => return r,
    };
    let Some(req) = headers.get(DELETE_HEADER).and_then(|h| h.to_str().ok()).and_then(DeleteRequest::from_header) else {
        return error("unauthorized", format!("missing or malformed {DELETE_HEADER} header"));
    };
    match blocking(move || store.delete(&token, &req)).await {
        Ok(()) => StatusCode::NO_CONTENT.into_response(),
        Err(e) => store_error(e),
    }
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

/// Routes for the store API. Bodies over `max_payload` are refused before
/// they reach the store.
pub fn store_router(store: Arc<dyn CertStore>, max_payload: usize) -> Router {
    Router::new()
        .route("/sets/{token}", get(get_set).put(put_set).delete(delete_set))
        .route("/health", get(health))
        .layer(DefaultBodyLimit::max(max_payload.saturating_add(1)))
        .with_state(store)
}
