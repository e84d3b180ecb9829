use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::Router;
use tokio::net::TcpListener;

use crate::api::{route, Session};

async fn dispatch(State(session): State<Arc<Session>>, method: Method, uri: Uri, body: Bytes) -> Response {
    let path = uri.path().to_string();
    // Decoding is CPU-bound; keep it off the IO threads.
    let res = tokio::task::spawn_blocking(move || route(&session, method.as_str(), &path, &body))
        .await
        .expect("request handler panicked");
    let status = StatusCode::from_u16(res.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (status, [(header::CONTENT_TYPE, "application/json")], res.body).into_response()
}

pub fn router(session: Arc<Session>) -> Router {
    Router::new().fallback(dispatch).with_state(session)
}

/// Serves until the listener fails.
pub async fn serve(listener: TcpListener, session: Arc<Session>) -> std::io::Result<()> {
    axum::serve(listener, router(session)).await
}
