//! HTTP grading service.
//!
//! | method | path                              |
//! |--------|-----------------------------------|
//! | GET    | `/api/problems`                   |
//! | POST   | `/api/sessions`                   |
//! | POST   | `/api/problems/{id}/attempts`     |
//! | GET    | `/api/students/{id}/attempts`     |
//!
//! Anything else is served from the static directory, if one is configured.
//! Every graded attempt is appended to the attempt log and synced before the
//! response is sent.

mod assets;
mod error;
mod routes;
mod state;

use std::future::Future;

use axum::extract::DefaultBodyLimit;
use axum::routing::{get, post};
use axum::Router;

pub use error::{ApiError, ServerError};
pub use routes::{AttemptResponse, History, HistoryEntry, ProblemSummary, MAX_BODY_BYTES};
pub use state::{hashed_group, load_model_dir, AppState, ServerConfig, Session};

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/problems", get(routes::list_problems))
        .route("/api/sessions", post(routes::create_session))
        .route("/api/problems/{id}/attempts", post(routes::submit_attempt))
        .route("/api/students/{id}/attempts", get(routes::student_attempts))
        .fallback(assets::static_files)
        // JSON escaping can inflate a body well past its raw size.
        .layer(DefaultBodyLimit::max(6 * MAX_BODY_BYTES + 4096))
        .with_state(state)
}

pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
