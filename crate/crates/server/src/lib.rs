//! HTTP service for collaborative entity-type annotation.
//!
//! Serves the corpus, per-annotator sessions and the manager's analytics
//! over JSON. Each session is persisted as an append-only JSONL log under
//! `<data_dir>/sessions/` and replayed on startup.

pub mod api;
pub mod config;
pub mod error;
pub mod project;
pub mod state;
pub mod store;

use std::io;

pub use api::{router, IntegrationReport, SessionView, ANNOTATOR_HEADER};
pub use config::{ConfigError, ProjectConfig, DATA_DIR_ENV};
pub use error::ApiError;
pub use project::{report_json, LoadError, Project};
pub use state::AppState;
pub use store::{SessionStore, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("session store: {0}")]
    Store(#[from] StoreError),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: io::Error,
    },
    #[error("server: {0}")]
    Io(#[from] io::Error),
}

/// Loads the project, replays session logs and builds the state.
pub fn build_state(config: &ProjectConfig) -> Result<AppState, ServeError> {
    let project = Project::from_config(config)?;
    let store = SessionStore::open(&config.data_dir)?;
    Ok(AppState::new(project, store)?)
}

/// Runs the service until Ctrl-C.
pub async fn serve(config: ProjectConfig) -> Result<(), ServeError> {
    let state = build_state(&config)?;
    let listener = tokio::net::TcpListener::bind(&config.listen_addr)
        .await
        .map_err(|source| ServeError::Bind {
            addr: config.listen_addr.clone(),
            source,
        })?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
