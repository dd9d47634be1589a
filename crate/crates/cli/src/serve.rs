//! HTTP transport for the session service: `POST /api` carries one request
//! envelope and returns one response envelope.

use std::sync::Arc;

use anyhow::{Context, Result};
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::Router;

use autoevolute::service::Service;

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/api", post(api))
        .route("/health", get(|| async { "ok" }))
        .with_state(service)
}

async fn api(State(service): State<Arc<Service>>, body: String) -> impl IntoResponse {
    // evaluation is CPU-bound; keep it off the async workers
    let reply = tokio::task::spawn_blocking(move || service.handle_json(&body)).await;
    match reply {
        Ok(text) => (StatusCode::OK, [(header::CONTENT_TYPE, "application/json")], text),
        Err(e) => (
            StatusCode::INTERNAL_SERVER_ERROR,
            [(header::CONTENT_TYPE, "text/plain")],
            e.to_string(),
        ),
    }
}

pub fn run(host: &str, port: u16) -> Result<()> {
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .with_context(|| format!("binding {host}:{port}"))?;
        log::info!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, router(Arc::new(Service::new()))).await?;
        Ok(())
    })
}
