//! Real-time side of the quality predictor: rolling predictions over the
//! open epoch, final predictions per closed epoch, edge-triggered limit
//! alerts, dataset export for retraining, and the HTTP API.

pub mod alerts;
pub mod api;
pub mod engine;
pub mod error;
pub mod limits;
pub mod metrics;
pub mod store;

pub use alerts::{AlertEvent, AlertTracker};
pub use api::Service;
pub use engine::{EngineConfig, EngineEvent, Prediction, PredictionKind, PredictorEngine};
pub use error::{Error, Result};
pub use limits::{Direction, QualityLimits, TargetLimits};

/// Serves `service` on `listener` until the future is dropped.
pub async fn serve(listener: tokio::net::TcpListener, service: Service) -> std::io::Result<()> {
    axum::serve(listener, service.router()).await
}
