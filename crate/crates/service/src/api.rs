//! HTTP API over a shared [`PredictorEngine`]. All bodies are JSON; the
//! prediction stream is server-sent events.
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/api/health` | `ok` or `degraded` with reasons |
//! | GET | `/api/snapshot` | latest value per channel, lambda, open epoch |
//! | GET | `/api/history/{channel}` | rolling `[t_ms, value]` pairs |
//! | GET | `/api/predictions?target=&epoch=` | buffered rolling predictions |
//! | GET | `/api/predictions/stream` | SSE of predictions, alerts and epoch closures |
//! | GET | `/api/epochs` | final predictions and features per closed epoch |
//! | GET | `/api/alerts` | all alerts, oldest first |
//! | POST | `/api/alerts/{id}/ack` | acknowledge one alert |
//! | GET, PUT | `/api/limits` | the whole limit table |
//! | PUT | `/api/limits/{target}` | one target's `{lower, upper}` |
//! | GET | `/api/models` | metadata of the loaded models |
//! | GET | `/api/metrics` | latency histograms and counters |

use std::convert::Infallible;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Instant;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use futures::stream::{self, Stream};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sprayq_aggregator::live::Snapshot;
use sprayq_aggregator::SensorEvent;
use sprayq_core::QualityTarget;
use tokio::sync::broadcast;

use crate::engine::{EngineEvent, PredictorEngine};
use crate::limits::{QualityLimits, TargetLimits};
use crate::metrics::Histogram;

/// An engine event on its way to push subscribers.
#[derive(Debug, Clone)]
pub struct Pushed {
    pub event: EngineEvent,
    /// When the event that caused it was handed to the engine.
    pub received: Instant,
}

/// The engine plus its push channel, shared by the feeder and the handlers.
#[derive(Clone)]
pub struct Service {
    engine: Arc<Mutex<PredictorEngine>>,
    tx: broadcast::Sender<Pushed>,
    push_latency: Arc<Mutex<Histogram>>,
}

impl Service {
    pub fn new(engine: PredictorEngine) -> Self {
        let (tx, _) = broadcast::channel(4096);
        Service {
            engine: Arc::new(Mutex::new(engine)),
            tx,
            push_latency: Arc::new(Mutex::new(Histogram::default())),
        }
    }

    /// A poisoned lock only means a panicking handler; the engine state is
    /// still consistent between calls.
    pub fn engine(&self) -> MutexGuard<'_, PredictorEngine> {
        self.engine.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn ingest(&self, ev: &SensorEvent) -> Vec<EngineEvent> {
        let received = Instant::now();
        let out = self.engine().ingest(ev);
        for event in &out {
            // No subscribers is fine.
            let _ = self.tx.send(Pushed { event: event.clone(), received });
        }
        out
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Pushed> {
        self.tx.subscribe()
    }

    pub fn push_latency(&self) -> Histogram {
        self.push_latency.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn router(&self) -> Router {
        Router::new()
            .route("/api/health", get(health))
            .route("/api/snapshot", get(snapshot))
            .route("/api/history/{channel}", get(history))
            .route("/api/predictions", get(predictions))
            .route("/api/predictions/stream", get(prediction_stream))
            .route("/api/epochs", get(epochs))
            .route("/api/alerts", get(alerts))
            .route("/api/alerts/{id}/ack", post(acknowledge))
            .route("/api/limits", get(limits).put(put_limits))
            .route("/api/limits/{target}", put(put_target_limits))
            .route("/api/models", get(models))
            .route("/api/metrics", get(metrics))
            .with_state(self.clone())
    }
}

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn not_found(what: impl Into<String>) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, what.into())
}

fn parse_target(s: &str) -> Result<QualityTarget, ApiError> {
    s.parse().map_err(|e: sprayq_core::Error| ApiError(StatusCode::BAD_REQUEST, e.to_string()))
}

async fn health(State(s): State<Service>) -> Response {
    let h = s.engine().health();
    let code = if h.status == "ok" { StatusCode::OK } else { StatusCode::SERVICE_UNAVAILABLE };
    (code, Json(h)).into_response()
}

#[derive(Serialize)]
struct SnapshotBody {
    #[serde(flatten)]
    live: Snapshot,
    open_epoch: Option<u64>,
    last_event_t_ms: Option<i64>,
}

async fn snapshot(State(s): State<Service>) -> Json<SnapshotBody> {
    let mut e = s.engine();
    Json(SnapshotBody {
        live: e.snapshot(),
        open_epoch: e.open_epoch().map(|(id, _)| id),
        last_event_t_ms: e.health().last_event_t_ms,
    })
}

async fn history(State(s): State<Service>, Path(channel): Path<String>) -> Result<Response, ApiError> {
    let h = s.engine().history(&channel).ok_or_else(|| not_found(format!("no channel {channel}")))?;
    Ok(Json(json!({ "channel": channel, "points": h })).into_response())
}

#[derive(Deserialize)]
struct PredictionQuery {
    target: Option<String>,
    epoch: Option<u64>,
}

async fn predictions(State(s): State<Service>, Query(q): Query<PredictionQuery>) -> Result<Response, ApiError> {
    let target = q.target.as_deref().map(parse_target).transpose()?;
    let e = s.engine();
    let list: Vec<_> = e
        .predictions()
        .filter(|p| target.is_none_or(|t| p.target == t) && q.epoch.is_none_or(|k| p.epoch == k))
        .collect();
    Ok(Json(list).into_response())
}

async fn prediction_stream(State(s): State<Service>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = s.subscribe();
    let latency = s.push_latency.clone();
    let events = stream::unfold((rx, latency), |(mut rx, latency)| async move {
        loop {
            match rx.recv().await {
                Ok(p) => {
                    let name = match &p.event {
                        EngineEvent::Prediction(_) => "prediction",
                        EngineEvent::Alert(_) => "alert",
                        EngineEvent::EpochClosed { .. } => "epoch_closed",
                        EngineEvent::TickSkipped { .. } => "tick_skipped",
                    };
                    let ev = Event::default().event(name).json_data(&p.event).unwrap_or_else(|e| {
                        Event::default().event("error").data(e.to_string())
                    });
                    let ms = p.received.elapsed().as_secs_f64() * 1000.0;
                    latency.lock().unwrap_or_else(|e| e.into_inner()).record(ms);
                    return Some((Ok(ev), (rx, latency)));
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    log::warn!("push subscriber lagged, {n} events dropped");
                }
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    Sse::new(events).keep_alive(KeepAlive::default())
}

async fn epochs(State(s): State<Service>) -> Response {
    Json(s.engine().epochs()).into_response()
}

async fn alerts(State(s): State<Service>) -> Response {
    Json(s.engine().alerts()).into_response()
}

async fn acknowledge(State(s): State<Service>, Path(id): Path<u64>) -> Result<Response, ApiError> {
    let a = s.engine().acknowledge(id).ok_or_else(|| not_found(format!("no alert {id}")))?;
    Ok(Json(a).into_response())
}

async fn limits(State(s): State<Service>) -> Json<QualityLimits> {
    Json(s.engine().limits().clone())
}

async fn put_limits(State(s): State<Service>, Json(l): Json<QualityLimits>) -> Result<Response, ApiError> {
    let mut e = s.engine();
    e.set_limits(l).map_err(|err| ApiError(StatusCode::UNPROCESSABLE_ENTITY, err.to_string()))?;
    Ok(Json(e.limits().clone()).into_response())
}

async fn put_target_limits(
    State(s): State<Service>,
    Path(target): Path<String>,
    Json(l): Json<TargetLimits>,
) -> Result<Response, ApiError> {
    let target = parse_target(&target)?;
    let mut e = s.engine();
    e.set_target_limits(target, l)
        .map_err(|err| ApiError(StatusCode::UNPROCESSABLE_ENTITY, err.to_string()))?;
    Ok(Json(e.limits().clone()).into_response())
}

async fn models(State(s): State<Service>) -> Response {
    Json(s.engine().models()).into_response()
}

async fn metrics(State(s): State<Service>) -> Response {
    let push = s.push_latency();
    let e = s.engine();
    let m = e.metrics();
    Json(json!({
        "tick_latency_ms": m.tick_latency,
        "push_latency_ms": push,
        "ticks": m.ticks,
        "skipped_ticks": m.skipped_ticks,
        "deferred_predictions": m.deferred_predictions,
        "events": m.events,
        "epochs_closed": m.epochs_closed,
        "dead_lettered": m.dead_lettered,
        "ingest": e.ingest_stats(),
        "snapshot_staleness": e.channel_staleness(),
    }))
    .into_response()
}
