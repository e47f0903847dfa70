//! HTTP service for conducting a two-stage combination dose-finding trial.
//!
//! Every trial is an append-only JSON-lines event log under a data directory.
//! Submissions are persisted before the response is sent, and restarting the
//! service replays the logs, so a trial survives crashes unchanged. The
//! per-trial seed recorded at creation makes every recommendation
//! reproducible.
//!
//! ```no_run
//! # async fn run() -> std::io::Result<()> {
//! let config = combidose_service::ServiceConfig::new("trial-data");
//! combidose_service::serve(config).await
//! # }
//! ```

pub mod error;
pub mod routes;
pub mod store;
pub mod trial;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::http::{HeaderValue, Method, StatusCode};
use axum::Router;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};
use tower_http::timeout::TimeoutLayer;

pub use error::ApiError;
pub use store::Store;
pub use trial::{TrialConfig, TrialState};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub addr: SocketAddr,
    /// Origins allowed by CORS; empty allows any.
    pub allowed_origins: Vec<String>,
    pub request_timeout: Duration,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            data_dir: data_dir.into(),
            addr: SocketAddr::from(([127, 0, 0, 1], 8080)),
            allowed_origins: Vec::new(),
            request_timeout: Duration::from_secs(30),
        }
    }
}

fn cors(origins: &[String]) -> Result<CorsLayer, ApiError> {
    let layer = CorsLayer::new()
        .allow_methods([Method::GET, Method::POST])
        .allow_headers(Any);
    if origins.is_empty() {
        return Ok(layer.allow_origin(Any));
    }
    let values = origins
        .iter()
        .map(|o| HeaderValue::from_str(o).map_err(|_| ApiError::bad_request(format!("bad CORS origin {o:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(layer.allow_origin(AllowOrigin::list(values)))
}

/// The full application: the API nested under `/v1` plus middleware.
pub fn app(store: Arc<Store>, config: &ServiceConfig) -> Result<Router, ApiError> {
    Ok(Router::new()
        .nest("/v1", routes::routes(store))
        .layer(TimeoutLayer::with_status_code(StatusCode::REQUEST_TIMEOUT, config.request_timeout))
        .layer(cors(&config.allowed_origins)?))
}

/// Open the data directory and serve until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> std::io::Result<()> {
    let store = Store::open(&config.data_dir).map_err(std::io::Error::other)?;
    let app = app(Arc::new(store), &config).map_err(std::io::Error::other)?;
    let listener = tokio::net::TcpListener::bind(config.addr).await?;
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
