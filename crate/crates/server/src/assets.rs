use std::path::{Component, Path, PathBuf};

use axum::body::Body;
use axum::extract::State;
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};

use crate::error::ApiError;
use crate::state::AppState;

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).unwrap_or("") {
        "html" => "text/html; charset=utf-8",
        "js" | "mjs" => "text/javascript; charset=utf-8",
        "css" => "text/css; charset=utf-8",
        "json" | "map" => "application/json",
        "svg" => "image/svg+xml",
        "png" => "image/png",
        "ico" => "image/x-icon",
        "woff2" => "font/woff2",
        "woff" => "font/woff",
        "ttf" => "font/ttf",
        "txt" => "text/plain; charset=utf-8",
        _ => "application/octet-stream",
    }
}

/// Maps a request path onto `root`, refusing anything that could escape it.
pub(crate) fn resolve(root: &Path, request_path: &str) -> Option<PathBuf> {
    let rel = Path::new(request_path.trim_start_matches('/'));
    let mut out = root.to_path_buf();
    for c in rel.components() {
        match c {
            Component::Normal(part) => out.push(part),
            Component::CurDir => {}
            _ => return None,
        }
    }
    Some(out)
}

/// Serves the web bundle. Unknown paths without an extension fall back to
/// `index.html` so client-side routes survive a reload.
pub async fn static_files(State(state): State<AppState>, uri: Uri) -> Response {
    let not_found = || ApiError::not_found(format!("no route for {}", uri.path())).into_response();
    if uri.path().starts_with("/api/") {
        return not_found();
    }
    let Some(root) = state.0.static_dir.as_deref() else {
        return not_found();
    };
    let Some(mut path) = resolve(root, uri.path()) else {
        return not_found();
    };
    if path.is_dir() {
        path.push("index.html");
    }
    if !path.is_file() && path.extension().is_none() {
        path = root.join("index.html");
    }
    match tokio::fs::read(&path).await {
        Ok(bytes) => (
            StatusCode::OK,
            [(header::CONTENT_TYPE, content_type(&path))],
            Body::from(bytes),
        )
            .into_response(),
        Err(_) => not_found(),
    }
}
