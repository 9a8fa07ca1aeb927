//! HTTP service for live labeling sessions.
//!
//! A session holds a set of objects and an online learner. Clients fetch a
//! query, post the chosen option and read back statistics, a low-dimensional
//! embedding or the raw kernel. With a data directory every session keeps an
//! append-only answer log and periodic checkpoints and is recovered on
//! restart.
//!
//! | method | path | body / result |
//! |---|---|---|
//! | `POST` | `/sessions` | `{objects, policy?, model?, passes?, seed?, checkpoint_every?}` → `{id}` |
//! | `GET` | `/sessions/{id}/query` | `{query_id, head, options}` |
//! | `POST` | `/sessions/{id}/answer` | `{query_id, chosen}` → update report |
//! | `GET` | `/sessions/{id}/embedding?k=2` | `{k, axis_weights, points}` |
//! | `GET` | `/sessions/{id}/stats` | answers, error over the log, projection counters |
//! | `GET` | `/sessions/{id}/kernel` | kernel checkpoint text |
//!
//! Errors come back as `{code, message}` with a 4xx status.

mod error;
pub mod http;
pub mod session;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

pub use error::{Result, ServiceError};
pub use http::{app, router, ErrorBody};
pub use session::{Session, SessionSettings};
pub use store::{NewSession, SessionStore};

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub addr: SocketAddr,
    /// Persist sessions here; in-memory only when `None`.
    pub data_dir: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
}

/// Binds `config.addr` and serves until the process is stopped.
pub async fn serve(config: ServiceConfig) -> Result<()> {
    let store = match &config.data_dir {
        Some(dir) => SessionStore::open(dir)?,
        None => SessionStore::in_memory(),
    };
    let app = app(Arc::new(store), config.static_dir.clone());
    let listener = tokio::net::TcpListener::bind(config.addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, app).await?;
    Ok(())
}
