//! HTTP API for interactive recoloring sessions.
//!
//! A session holds one uploaded source image, any number of target
//! images, and the current set of scribbled correspondences. Solves run
//! in the background; clients poll for the result. Landmarks and weight
//! graphs are cached per session, so re-solving after editing scribbles
//! only repeats the constraint and solve stages.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/api/session` | upload source (PNG/JPEG body) → 201 `{"id"}` |
//! | POST | `/api/session/{id}/target` | upload target → 201 `{"target_id"}` |
//! | PUT | `/api/session/{id}/correspondences` | JSON scribbles → 204 |
//! | POST | `/api/session/{id}/solve?mode=full\|preview` | optional JSON config → 202 `{"job"}` |
//! | GET | `/api/session/{id}/result/{job}` | PNG when done, 409 while running |
//! | GET | `/api/session/{id}/status` | session and job summary |

mod api;
pub mod error;
pub mod session;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::DefaultBodyLimit;
use axum::routing::{get, post, put};
use axum::Router;
use tokio::sync::Semaphore;
use tower_http::services::ServeDir;

pub use api::Scribble;
pub use error::ApiError;
use session::SessionStore;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Directory served under `/` (the web client), if any.
    pub static_dir: Option<PathBuf>,
    pub session_ttl: Duration,
    pub max_upload_bytes: usize,
    /// Longer side of the image solved in preview mode.
    pub preview_dim: usize,
    /// Solves running at once across all sessions.
    pub max_concurrent_solves: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            static_dir: None,
            session_ttl: Duration::from_secs(30 * 60),
            max_upload_bytes: 32 * 1024 * 1024,
            preview_dim: 256,
            max_concurrent_solves: std::thread::available_parallelism().map_or(2, |n| n.get()),
        }
    }
}

#[derive(Debug)]
pub struct AppState {
    pub config: ServiceConfig,
    pub sessions: SessionStore,
    solves: Semaphore,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Arc<Self> {
        Arc::new(Self {
            sessions: SessionStore::new(config.session_ttl),
            solves: Semaphore::new(config.max_concurrent_solves.max(1)),
            config,
        })
    }
}

/// The API under `/api`, plus static files under `/` when configured.
pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/session", post(api::create_session))
        .route("/session/{id}/target", post(api::add_target))
        .route("/session/{id}/correspondences", put(api::put_correspondences))
        .route("/session/{id}/solve", post(api::solve))
        .route("/session/{id}/result/{job}", get(api::result))
        .route("/session/{id}/status", get(api::status))
        .fallback(api::no_route);
    let mut app = Router::new()
        .nest("/api", api)
        .layer(DefaultBodyLimit::max(state.config.max_upload_bytes));
    if let Some(dir) = &state.config.static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    app.with_state(state)
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(addr: std::net::SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(config)))
        .with_graceful_shutdown(async {
            tokio::signal::ctrl_c().await.ok();
        })
        .await
}
