//! Latest value per channel, short rolling histories, and snapshot staleness.

use std::collections::{BTreeMap, VecDeque};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::channels::{ChannelConfig, FUEL_FLOW, OXYGEN_FLOW};
use crate::event::SensorEvent;

/// Desk-scale staleness budget for snapshots.
pub const STALENESS_BUDGET_MS: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiveConfig {
    pub history_len: usize,
    /// A channel with no event for this long is flagged stale.
    pub stale_after: Duration,
    pub r_stoich: f64,
}

impl Default for LiveConfig {
    fn default() -> Self {
        LiveConfig {
            history_len: 600,
            stale_after: Duration::from_secs(2),
            r_stoich: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Latest {
    t_ms: i64,
    value: Option<f64>,
    ingested: Instant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSnapshot {
    pub t_ms: i64,
    pub value: Option<f64>,
    pub age_ms: f64,
    pub stale: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub channels: BTreeMap<String, ChannelSnapshot>,
    /// Fuel-oxygen ratio from the latest fuel and oxygen readings.
    pub lambda: Option<f64>,
    /// Time since the most recent ingest, in milliseconds.
    pub staleness_ms: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StalenessStats {
    pub samples: u64,
    pub max_ms: f64,
    pub mean_ms: f64,
    pub over_budget: u64,
}

#[derive(Debug, Clone)]
pub struct LiveView {
    cfg: LiveConfig,
    latest: BTreeMap<String, Latest>,
    history: BTreeMap<String, VecDeque<(i64, Option<f64>)>>,
    last_ingest: Option<Instant>,
    stats: StalenessStats,
}

impl LiveView {
    pub fn new(cfg: LiveConfig) -> Self {
        LiveView {
            cfg,
            latest: BTreeMap::new(),
            history: BTreeMap::new(),
            last_ingest: None,
            stats: StalenessStats::default(),
        }
    }

    pub fn ingest(&mut self, ev: &SensorEvent, at: Instant) {
        let value = ev.reading();
        self.latest.insert(
            ev.channel.clone(),
            Latest {
                t_ms: ev.t_ms,
                value,
                ingested: at,
            },
        );
        let h = self.history.entry(ev.channel.clone()).or_default();
        if h.len() == self.cfg.history_len {
            h.pop_front();
        }
        h.push_back((ev.t_ms, value));
        self.last_ingest = Some(at);
    }

    /// Takes a snapshot and records its staleness.
    pub fn snapshot(&mut self, now: Instant) -> Snapshot {
        let snap = self.peek(now);
        if let Some(s) = snap.staleness_ms {
            let n = self.stats.samples as f64;
            self.stats.mean_ms = (self.stats.mean_ms * n + s) / (n + 1.0);
            self.stats.samples += 1;
            self.stats.max_ms = self.stats.max_ms.max(s);
            if s > STALENESS_BUDGET_MS {
                self.stats.over_budget += 1;
            }
        }
        snap
    }

    /// Snapshot without touching the staleness metric.
    pub fn peek(&self, now: Instant) -> Snapshot {
        let age = |at: Instant| now.saturating_duration_since(at).as_secs_f64() * 1000.0;
        let channels = self
            .latest
            .iter()
            .map(|(k, l)| {
                (
                    k.clone(),
                    ChannelSnapshot {
                        t_ms: l.t_ms,
                        value: l.value,
                        age_ms: age(l.ingested),
                        stale: now.saturating_duration_since(l.ingested) > self.cfg.stale_after,
                    },
                )
            })
            .collect();
        let val = |ch: &str| self.latest.get(ch).and_then(|l| l.value);
        let lambda = match (val(OXYGEN_FLOW), val(FUEL_FLOW)) {
            (Some(o), Some(f)) if f > 0.0 => Some(o / f / self.cfg.r_stoich),
            _ => None,
        };
        Snapshot {
            channels,
            lambda,
            staleness_ms: self.last_ingest.map(age),
        }
    }

    pub fn history(&self, channel: &str) -> Option<Vec<(i64, Option<f64>)>> {
        self.history.get(channel).map(|h| h.iter().copied().collect())
    }

    pub fn channels(&self) -> impl Iterator<Item = &str> {
        self.latest.keys().map(String::as_str)
    }

    pub fn staleness(&self) -> StalenessStats {
        self.stats
    }

    /// Channels whose latest reading is more than `band_pct` percent of the
    /// configured target away from it.
    pub fn out_of_band(&self, channels: &[ChannelConfig], band_pct: f64) -> Vec<String> {
        channels
            .iter()
            .filter(|c| {
                let v = self.latest.get(&c.id).and_then(|l| l.value);
                v.is_some_and(|v| (v - c.target_value).abs() > band_pct / 100.0 * c.target_value.abs())
            })
            .map(|c| c.id.clone())
            .collect()
    }

    /// Channels whose last event is older than the stale threshold.
    pub fn stale_channels(&self, now: Instant) -> Vec<String> {
        self.latest
            .iter()
            .filter(|(_, l)| now.saturating_duration_since(l.ingested) > self.cfg.stale_after)
            .map(|(k, _)| k.clone())
            .collect()
    }
}
