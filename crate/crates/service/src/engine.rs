//! The prediction loop: events in, rolling and final predictions, alerts and
//! epoch records out.
//!
//! Ticks run on stream time. The first event whose timestamp reaches the
//! next due tick triggers it, and features are taken over the open epoch up
//! to that timestamp. A replay therefore yields the same predictions at any
//! pacing; only the measured latencies differ.

use std::collections::{BTreeMap, VecDeque};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sprayq_aggregator::dataset_io::FeatureRow;
use sprayq_aggregator::live::{LiveConfig, LiveView, Snapshot};
use sprayq_aggregator::{Aggregator, AggregatorConfig, ClosedEpoch, FeatureVector, SensorEvent, FEATURE_NAMES};
use sprayq_core::{KernelSpec, QualityTarget, SemklModel};

use crate::alerts::{AlertEvent, AlertTracker};
use crate::error::{Error, Result};
use crate::limits::{QualityLimits, TargetLimits};
use crate::metrics::Histogram;
use crate::store::{DatasetStore, Persisted};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    #[serde(default = "default_cadence_ms")]
    pub cadence_ms: i64,
    /// No rolling predictions until the epoch has run this long; the first
    /// seconds of data say little about the epoch averages.
    #[serde(default = "default_warmup_ms")]
    pub warmup_ms: i64,
    /// Rolling predictions kept for the history endpoint.
    #[serde(default = "default_prediction_buffer")]
    pub prediction_buffer: usize,
    /// Wall seconds without any event before the stream counts as stale.
    #[serde(default = "default_stale_after_s")]
    pub stale_after_s: f64,
    /// A rolling prediction from a model that uses the pyrometer peak or
    /// rates waits until the running maximum is this old. Before that the
    /// partial epoch is still heating and those features are not known.
    #[serde(default = "default_pyro_settle_ms")]
    pub pyro_settle_ms: i64,
}

fn default_cadence_ms() -> i64 {
    1000
}

fn default_warmup_ms() -> i64 {
    5000
}

fn default_prediction_buffer() -> usize {
    20_000
}

fn default_stale_after_s() -> f64 {
    5.0
}

fn default_pyro_settle_ms() -> i64 {
    2000
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            cadence_ms: default_cadence_ms(),
            warmup_ms: default_warmup_ms(),
            prediction_buffer: default_prediction_buffer(),
            stale_after_s: default_stale_after_s(),
            pyro_settle_ms: default_pyro_settle_ms(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cadence_ms <= 0 || self.warmup_ms < 0 || self.pyro_settle_ms < 0 || !(self.stale_after_s > 0.0) {
            return Err(Error::Config(
                "cadence_ms and stale_after_s must be positive, warmup_ms and pyro_settle_ms non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionKind {
    Rolling,
    Final,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub target: QualityTarget,
    pub value: f64,
    pub t_ms: i64,
    pub epoch: u64,
    pub kind: PredictionKind,
    pub within_limits: bool,
    /// From receipt of the triggering event to this prediction being ready.
    pub latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub start_ms: i64,
    pub end_ms: i64,
    pub predictions: Vec<Prediction>,
    pub features: Option<FeatureVector>,
    pub error: Option<String>,
    pub persisted: Option<Persisted>,
}

/// Everything one ingested event caused, in emission order.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EngineEvent {
    Prediction(Prediction),
    Alert(AlertEvent),
    EpochClosed { epoch: u64, error: Option<String> },
    TickSkipped { t_ms: i64, epoch: u64, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelInfo {
    pub target: QualityTarget,
    pub feature_names: Vec<String>,
    pub c: f64,
    pub p: f64,
    pub epsilon: f64,
    pub kernels: Vec<KernelSpec>,
    pub weights: Vec<f64>,
    pub support_vectors: usize,
    pub training_rows: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Health {
    pub status: &'static str,
    pub reasons: Vec<String>,
    pub models: usize,
    pub open_epoch: Option<u64>,
    pub last_event_t_ms: Option<i64>,
    pub seconds_since_last_event: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EngineMetrics {
    /// Worst latency of each tick that produced a prediction.
    pub tick_latency: Histogram,
    /// Ticks that produced at least one prediction.
    pub ticks: u64,
    pub skipped_ticks: u64,
    /// Rolling predictions held back while the pyrometer peak was unsettled.
    pub deferred_predictions: u64,
    pub events: u64,
    pub epochs_closed: u64,
    pub dead_lettered: u64,
}

struct LoadedModel {
    model: SemklModel,
    /// Position of each model input in the 27-feature vector.
    columns: Vec<usize>,
    uses_pyro_peak: bool,
}

/// Pyrometer maximum, heat-up rate and cool-down rate.
const PYRO_PEAK_FEATURES: [&str; 3] = ["pyro_max_temperature", "pyro_heat_up_rate", "pyro_cool_down_rate"];

impl LoadedModel {
    fn predict(&self, f: &FeatureVector) -> Result<f64> {
        let x: Vec<f64> = self.columns.iter().map(|&i| f.values[i]).collect();
        Ok(self.model.predict(&x)?)
    }
}

pub struct PredictorEngine {
    cfg: EngineConfig,
    agg: Aggregator,
    live: LiveView,
    models: BTreeMap<QualityTarget, LoadedModel>,
    limits: QualityLimits,
    alerts: AlertTracker,
    store: Option<DatasetStore>,
    next_tick: Option<(u64, i64)>,
    predictions: VecDeque<Prediction>,
    epochs: Vec<EpochRecord>,
    last_ingest: Option<Instant>,
    metrics: EngineMetrics,
}

impl PredictorEngine {
    pub fn new(agg_cfg: AggregatorConfig, cfg: EngineConfig, limits: QualityLimits) -> Result<Self> {
        cfg.validate()?;
        limits.validate()?;
        let live = LiveView::new(LiveConfig {
            r_stoich: agg_cfg.features.r_stoich,
            ..LiveConfig::default()
        });
        Ok(PredictorEngine {
            cfg,
            agg: Aggregator::new(agg_cfg)?,
            live,
            models: BTreeMap::new(),
            limits,
            alerts: AlertTracker::default(),
            store: None,
            next_tick: None,
            predictions: VecDeque::new(),
            epochs: Vec::new(),
            last_ingest: None,
            metrics: EngineMetrics {
                tick_latency: Histogram::default(),
                ticks: 0,
                skipped_ticks: 0,
                deferred_predictions: 0,
                events: 0,
                epochs_closed: 0,
                dead_lettered: 0,
            },
        })
    }

    pub fn with_store(mut self, store: DatasetStore) -> Self {
        self.store = Some(store);
        self
    }

    /// Installs the model for `target`, replacing any previous one.
    pub fn load_model(&mut self, target: QualityTarget, model: SemklModel) -> Result<()> {
        if let Some(t) = model.target.filter(|&t| t != target) {
            return Err(Error::Model {
                target: target.to_string(),
                msg: format!("model was trained for {t}"),
            });
        }
        let columns = model
            .feature_names
            .iter()
            .map(|n| {
                FEATURE_NAMES.iter().position(|f| f == n).ok_or_else(|| Error::Model {
                    target: target.to_string(),
                    msg: format!("unknown feature {n}"),
                })
            })
            .collect::<Result<_>>()?;
        let uses_pyro_peak = model.feature_names.iter().any(|n| PYRO_PEAK_FEATURES.contains(&n.as_str()));
        self.models.insert(target, LoadedModel { model, columns, uses_pyro_peak });
        Ok(())
    }

    pub fn ingest(&mut self, ev: &SensorEvent) -> Vec<EngineEvent> {
        let received = Instant::now();
        self.last_ingest = Some(received);
        self.metrics.events += 1;
        self.live.ingest(ev, received);
        let mut out = Vec::new();
        if let Some(closed) = self.agg.ingest(ev) {
            self.next_tick = None;
            self.finalize(closed, received, &mut out);
            return out;
        }
        let Some((epoch, start)) = self.agg.open_epoch() else {
            return out;
        };
        let due = match self.next_tick {
            Some((e, due)) if e == epoch => due,
            _ => start + self.cfg.warmup_ms,
        };
        self.next_tick = Some((epoch, due));
        if ev.t_ms >= due && !self.models.is_empty() {
            self.tick(epoch, ev.t_ms, received, &mut out);
            // The next due time stays on the start + warmup + k * cadence grid.
            let k = (ev.t_ms - due) / self.cfg.cadence_ms + 1;
            self.next_tick = Some((epoch, due + k * self.cfg.cadence_ms));
        }
        out
    }

    fn tick(&mut self, epoch: u64, t_ms: i64, received: Instant, out: &mut Vec<EngineEvent>) {
        let features = match self.agg.partial_features(t_ms) {
            Ok((_, f)) => f,
            Err(e) => {
                log::warn!("epoch {epoch}: tick at {t_ms} ms skipped: {e}");
                self.metrics.skipped_ticks += 1;
                out.push(EngineEvent::TickSkipped { t_ms, epoch, reason: e.to_string() });
                return;
            }
        };
        let preds = self.predict_all(&features, epoch, t_ms, PredictionKind::Rolling, received, out);
        if let Some(worst) = preds.iter().map(|p| p.latency_ms).reduce(f64::max) {
            self.metrics.ticks += 1;
            self.metrics.tick_latency.record(worst);
        }
        for p in preds {
            if self.predictions.len() == self.cfg.prediction_buffer {
                self.predictions.pop_front();
            }
            self.predictions.push_back(p);
        }
    }

    /// Predicts every loaded target; a failing or deferred model skips only
    /// its target.
    fn predict_all(
        &mut self,
        features: &FeatureVector,
        epoch: u64,
        t_ms: i64,
        kind: PredictionKind,
        received: Instant,
        out: &mut Vec<EngineEvent>,
    ) -> Vec<Prediction> {
        let mut values = Vec::new();
        let unsettled = kind == PredictionKind::Rolling && features.flags.pyro_peak_age_ms < self.cfg.pyro_settle_ms;
        for (&target, m) in &self.models {
            if unsettled && m.uses_pyro_peak {
                self.metrics.deferred_predictions += 1;
                continue;
            }
            match m.predict(features) {
                Ok(v) if v.is_finite() => values.push((target, v)),
                Ok(v) => log::warn!("{target}: non-finite prediction {v} at {t_ms} ms"),
                Err(e) => log::warn!("{target}: prediction failed at {t_ms} ms: {e}"),
            }
        }
        let latency_ms = received.elapsed().as_secs_f64() * 1000.0;
        let mut preds = Vec::with_capacity(values.len());
        for (target, value) in values {
            let violation = self.limits.check(target, value);
            let p = Prediction {
                target,
                value,
                t_ms,
                epoch,
                kind,
                within_limits: violation.is_none(),
                latency_ms,
            };
            out.push(EngineEvent::Prediction(p.clone()));
            if let Some(a) = self.alerts.observe(target, violation, value, t_ms, epoch) {
                log::info!("alert {}: {target} {:?} at {value}", a.id, a.direction);
                out.push(EngineEvent::Alert(a));
            }
            preds.push(p);
        }
        preds
    }

    fn finalize(&mut self, closed: ClosedEpoch, received: Instant, out: &mut Vec<EngineEvent>) {
        self.metrics.epochs_closed += 1;
        let mut record = EpochRecord {
            epoch: closed.epoch,
            start_ms: closed.start_ms,
            end_ms: closed.end_ms,
            predictions: Vec::new(),
            features: closed.features.clone(),
            error: closed.error.clone(),
            persisted: None,
        };
        if let Some(f) = &closed.features {
            record.predictions = self.predict_all(f, closed.epoch, closed.end_ms, PredictionKind::Final, received, out);
            if let Some(store) = &self.store {
                let row = FeatureRow {
                    epoch: closed.epoch,
                    features: f.values.clone(),
                    labels: BTreeMap::new(),
                };
                match store.persist(&row) {
                    Ok(p) => {
                        if matches!(p, Persisted::DeadLettered { .. }) {
                            self.metrics.dead_lettered += 1;
                        }
                        record.persisted = Some(p);
                    }
                    Err(e) => {
                        log::error!("epoch {}: row lost, dead-letter write failed: {e}", closed.epoch);
                        self.metrics.dead_lettered += 1;
                        record.persisted = Some(Persisted::DeadLettered {
                            attempts: store.config().attempts,
                            error: e.to_string(),
                        });
                    }
                }
            }
        } else {
            log::warn!("epoch {}: no features: {}", closed.epoch, closed.error.as_deref().unwrap_or("unknown"));
        }
        out.push(EngineEvent::EpochClosed { epoch: closed.epoch, error: closed.error });
        self.epochs.push(record);
    }

    pub fn snapshot(&mut self) -> Snapshot {
        self.live.snapshot(Instant::now())
    }

    pub fn history(&self, channel: &str) -> Option<Vec<(i64, Option<f64>)>> {
        self.live.history(channel)
    }

    pub fn predictions(&self) -> impl Iterator<Item = &Prediction> {
        self.predictions.iter()
    }

    pub fn epochs(&self) -> &[EpochRecord] {
        &self.epochs
    }

    pub fn alerts(&self) -> &[AlertEvent] {
        self.alerts.alerts()
    }

    pub fn acknowledge(&mut self, id: u64) -> Option<AlertEvent> {
        self.alerts.acknowledge(id)
    }

    pub fn limits(&self) -> &QualityLimits {
        &self.limits
    }

    /// New limits apply from the next prediction on; alert state carries over.
    pub fn set_limits(&mut self, limits: QualityLimits) -> Result<()> {
        limits.validate()?;
        self.limits = limits;
        Ok(())
    }

    pub fn set_target_limits(&mut self, target: QualityTarget, limits: TargetLimits) -> Result<()> {
        self.limits.set(target, limits)
    }

    pub fn open_epoch(&self) -> Option<(u64, i64)> {
        self.agg.open_epoch()
    }

    pub fn metrics(&self) -> &EngineMetrics {
        &self.metrics
    }

    pub fn ingest_stats(&self) -> sprayq_aggregator::pipeline::IngestStats {
        self.agg.stats()
    }

    pub fn channel_staleness(&self) -> sprayq_aggregator::live::StalenessStats {
        self.live.staleness()
    }

    pub fn models(&self) -> Vec<ModelInfo> {
        self.models
            .iter()
            .map(|(&target, m)| {
                let hp = &m.model.hyperparams;
                ModelInfo {
                    target,
                    feature_names: m.model.feature_names.clone(),
                    c: hp.c,
                    p: hp.p,
                    epsilon: hp.epsilon,
                    kernels: m.model.bank.specs().to_vec(),
                    weights: m.model.weights.gamma.clone(),
                    support_vectors: m
                        .model
                        .alpha
                        .iter()
                        .zip(&m.model.alpha_star)
                        .filter(|(a, s)| *a - *s != 0.0)
                        .count(),
                    training_rows: m.model.x_train.len(),
                    converged: m.model.converged,
                }
            })
            .collect()
    }

    pub fn health(&self) -> Health {
        let mut reasons = Vec::new();
        if self.models.is_empty() {
            reasons.push("no models loaded".to_string());
        }
        let since = self.last_ingest.map(|t| t.elapsed().as_secs_f64());
        match since {
            None => reasons.push("no stream data received".to_string()),
            Some(s) if s > self.cfg.stale_after_s => reasons.push(format!("stream stale for {s:.1} s")),
            Some(_) => {}
        }
        Health {
            status: if reasons.is_empty() { "ok" } else { "degraded" },
            reasons,
            models: self.models.len(),
            open_epoch: self.agg.open_epoch().map(|(e, _)| e),
            last_event_t_ms: self.agg.last_t_ms(),
            seconds_since_last_event: since,
        }
    }
}
