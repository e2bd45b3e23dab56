//! Change-driven storage: a reading is kept only when it moves at least
//! `deadband_pct` percent of the channel's target away from the last kept
//! reading. The first reading of an epoch and the last one are always kept.

use serde::{Deserialize, Serialize};

use crate::channels::ChannelConfig;
use crate::error::{Error, Result};
use crate::event::SensorEvent;
use crate::series::{StoredPoint, StoredSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Stored,
    Suppressed,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecorderStats {
    pub stored: u64,
    pub suppressed: u64,
    pub rejected: u64,
}

#[derive(Debug, Clone)]
pub struct DeadbandRecorder {
    cfg: ChannelConfig,
    threshold: f64,
    series: StoredSeries,
    last_seen: Option<StoredPoint>,
    last_seen_stored: bool,
    stats: RecorderStats,
}

impl DeadbandRecorder {
    pub fn new(cfg: ChannelConfig, epoch_start_ms: i64) -> Self {
        let threshold = cfg.deadband();
        DeadbandRecorder {
            series: StoredSeries::new(cfg.id.clone(), epoch_start_ms, epoch_start_ms),
            cfg,
            threshold,
            last_seen: None,
            last_seen_stored: false,
            stats: RecorderStats::default(),
        }
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.cfg
    }

    pub fn stats(&self) -> RecorderStats {
        self.stats
    }

    pub fn push(&mut self, ev: &SensorEvent) -> Result<Outcome> {
        if let Some(prev) = self.last_seen {
            if ev.t_ms < prev.t_ms {
                self.stats.rejected += 1;
                return Err(Error::OutOfOrder {
                    channel: self.cfg.id.clone(),
                    t_ms: ev.t_ms,
                    last_ms: prev.t_ms,
                });
            }
        }
        let point = StoredPoint {
            t_ms: ev.t_ms,
            value: ev.reading(),
        };
        let store = match (self.series.points.last().map(|p| p.value), point.value) {
            (None, _) => true,
            (Some(Some(kept)), Some(v)) => (v - kept).abs() >= self.threshold,
            (Some(None), None) => false,
            _ => true,
        };
        self.last_seen = Some(point);
        self.last_seen_stored = store;
        if store {
            self.series.points.push(point);
            self.stats.stored += 1;
            Ok(Outcome::Stored)
        } else {
            self.stats.suppressed += 1;
            Ok(Outcome::Suppressed)
        }
    }

    /// Stored points so far plus the latest reading, as if the epoch closed now.
    pub fn snapshot(&self, now_ms: i64) -> StoredSeries {
        let mut s = self.series.clone();
        s.epoch_end_ms = now_ms.max(s.epoch_start_ms);
        if let (Some(p), false) = (self.last_seen, self.last_seen_stored) {
            s.points.push(p);
        }
        s
    }

    pub fn finish(self, epoch_end_ms: i64) -> StoredSeries {
        self.snapshot(epoch_end_ms)
    }
}

/// Runs a whole epoch through a fresh recorder; out-of-order events are dropped.
pub fn deadband_record(cfg: &ChannelConfig, events: &[SensorEvent], epoch_start_ms: i64, epoch_end_ms: i64) -> (StoredSeries, RecorderStats) {
    let mut rec = DeadbandRecorder::new(cfg.clone(), epoch_start_ms);
    for ev in events {
        let _ = rec.push(ev);
    }
    let stats = rec.stats();
    (rec.finish(epoch_end_ms), stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::ChannelRole;
    use proptest::prelude::*;

    fn cfg(target: f64, pct: f64) -> ChannelConfig {
        ChannelConfig {
            deadband_pct: pct,
            ..ChannelConfig::new("fuel_flow", "l/min", target, ChannelRole::GasFlow)
        }
    }

    fn evs(values: &[f64]) -> Vec<SensorEvent> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| SensorEvent::good("fuel_flow", i as i64 * 100, v))
            .collect()
    }

    fn values(s: &StoredSeries) -> Vec<f64> {
        s.good_points().map(|(_, v)| v).collect()
    }

    #[test]
    fn rule_arithmetic() {
        let (s, _) = deadband_record(&cfg(1000.0, 1.0), &evs(&[1000.0, 1005.0, 1011.0]), 0, 300);
        assert_eq!(values(&s), vec![1000.0, 1011.0]);
    }

    #[test]
    fn constant_signal_keeps_first_and_last() {
        let (s, st) = deadband_record(&cfg(50.0, 1.0), &evs(&[50.0; 100]), 0, 10_000);
        assert_eq!(s.len(), 2);
        assert_eq!(s.points[0].t_ms, 0);
        assert_eq!(s.points[1].t_ms, 9_900);
        assert_eq!(st.stored + st.suppressed, 100);
        let (s, _) = deadband_record(&cfg(50.0, 1.0), &evs(&[50.0]), 0, 100);
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn threshold_is_inclusive() {
        let (s, _) = deadband_record(&cfg(100.0, 1.0), &evs(&[100.0, 101.0, 101.5]), 0, 300);
        assert_eq!(values(&s), vec![100.0, 101.0, 101.5]);
    }

    #[test]
    fn ramp_stores_about_one_point_per_width() {
        // 0.25 units per sample, 1.0 unit deadband, 40 widths
        let ramp: Vec<f64> = (0..=160).map(|i| 100.0 + 0.25 * i as f64).collect();
        let (s, _) = deadband_record(&cfg(100.0, 1.0), &evs(&ramp), 0, 16_100);
        let k = 40;
        assert!(s.len() >= k && s.len() <= k + 2, "{}", s.len());
    }

    #[test]
    fn gaps_are_marked_once_and_recovery_is_stored() {
        let mut e = evs(&[10.0, 10.0]);
        e.push(SensorEvent::missing("fuel_flow", 200));
        e.push(SensorEvent::missing("fuel_flow", 300));
        e.push(SensorEvent::good("fuel_flow", 400, 10.0));
        let (s, _) = deadband_record(&cfg(10.0, 1.0), &e, 0, 500);
        let pts: Vec<(i64, Option<f64>)> = s.points.iter().map(|p| (p.t_ms, p.value)).collect();
        assert_eq!(pts, vec![(0, Some(10.0)), (200, None), (400, Some(10.0))]);
    }

    #[test]
    fn out_of_order_is_rejected_and_counted() {
        let mut rec = DeadbandRecorder::new(cfg(10.0, 1.0), 0);
        rec.push(&SensorEvent::good("fuel_flow", 500, 1.0)).unwrap();
        assert!(matches!(rec.push(&SensorEvent::good("fuel_flow", 400, 5.0)), Err(Error::OutOfOrder { .. })));
        assert_eq!(rec.push(&SensorEvent::good("fuel_flow", 500, 1.0)).unwrap(), Outcome::Suppressed);
        assert_eq!(rec.stats(), RecorderStats { stored: 1, suppressed: 1, rejected: 1 });
    }

    #[test]
    fn smaller_deadband_can_store_fewer_on_reversing_signals() {
        // a wide band re-anchors on every swing; a narrow one anchors between them
        let raw = [0.0, 0.6, 1.1, 0.1, 1.1];
        let (wide, _) = deadband_record(&cfg(100.0, 1.0), &evs(&raw), 0, 500);
        let (narrow, _) = deadband_record(&cfg(100.0, 0.6), &evs(&raw), 0, 500);
        assert_eq!(values(&wide), vec![0.0, 1.1, 0.1, 1.1]);
        assert_eq!(values(&narrow), vec![0.0, 0.6, 1.1]);
    }

    proptest! {
        #[test]
        fn reconstruction_error_within_deadband(steps in prop::collection::vec(-3.0f64..3.0, 1..200), target in 1.0f64..500.0, pct in 0.1f64..5.0) {
            let mut v = target;
            let raw: Vec<f64> = steps.iter().map(|d| { v += d; v }).collect();
            let c = cfg(target, pct);
            let (s, _) = deadband_record(&c, &evs(&raw), 0, raw.len() as i64 * 100);
            for (i, x) in raw.iter().enumerate() {
                let r = s.reconstruct(i as i64 * 100).unwrap().unwrap();
                prop_assert!((r - x).abs() <= c.deadband() * (1.0 + 1e-12));
            }
        }

        #[test]
        fn smaller_deadband_never_stores_fewer_on_monotone_signals(steps in prop::collection::vec(0.0f64..3.0, 1..200), pct in 0.1f64..5.0, shrink in 0.0f64..1.0, falling in any::<bool>()) {
            let mut v = 100.0;
            let raw: Vec<f64> = steps.iter().map(|d| { v += if falling { -d } else { *d }; v }).collect();
            let (a, _) = deadband_record(&cfg(100.0, pct), &evs(&raw), 0, 0);
            let (b, _) = deadband_record(&cfg(100.0, pct * (0.01 + 0.99 * shrink)), &evs(&raw), 0, 0);
            prop_assert!(b.len() >= a.len());
        }
    }
}
