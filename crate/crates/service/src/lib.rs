//! HTTP + JSON service around a live classifier head.
//!
//! Predictions are served from an immutable head snapshot. A single
//! background job performs incremental class addition; when it finishes the
//! snapshot is swapped atomically, so readers never observe a partial head.
//! The teaching session is driven through [`openset_core::session`].

mod api;
mod config;
mod error;
mod state;

pub use api::router;
pub use config::EngineConfig;
pub use error::ApiError;
pub use state::{AppState, WorldSample};

use std::net::SocketAddr;
use std::sync::Arc;

/// Loads the engine and serves the API on `bind` until the process ends.
pub async fn serve(cfg: EngineConfig, bind: SocketAddr) -> Result<(), ServeError> {
    let state = Arc::new(AppState::from_config(&cfg)?);
    let listener = tokio::net::TcpListener::bind(bind).await.map_err(ServeError::Bind)?;
    tracing::info!("listening on {}", listener.local_addr().map_err(ServeError::Bind)?);
    axum::serve(listener, router(state)).await.map_err(ServeError::Io)
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("failed to load engine: {0}")]
    Load(#[from] config::LoadError),
    #[error("failed to bind: {0}")]
    Bind(std::io::Error),
    #[error(transparent)]
    Io(std::io::Error),
}
