//! Feeding a recorded event log back at stream-time pace or faster.

use std::time::{Duration, Instant};

use sprayq_aggregator::SensorEvent;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pacing {
    AsFastAsPossible,
    /// Stream milliseconds per wall millisecond.
    Speed(f64),
}

impl Pacing {
    /// `0` means as fast as possible.
    pub fn from_speed(speed: f64) -> Result<Self> {
        if speed == 0.0 {
            Ok(Pacing::AsFastAsPossible)
        } else if speed > 0.0 && speed.is_finite() {
            Ok(Pacing::Speed(speed))
        } else {
            Err(Error::Scenario(format!("replay speed must be >= 0, got {speed}")))
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ReplayStats {
    pub events: usize,
    pub wall: Duration,
    /// Worst delay of a delivery behind its scheduled wall time.
    pub max_lag: Duration,
}

/// Delivers `events` to `sink` in order. With [`Pacing::Speed`] each event
/// is released no earlier than `(t_ms - t_first) / speed` after the start.
pub fn replay<'a>(
    events: impl IntoIterator<Item = &'a SensorEvent>,
    pacing: Pacing,
    mut sink: impl FnMut(&SensorEvent),
) -> ReplayStats {
    let start = Instant::now();
    let mut first: Option<i64> = None;
    let mut stats = ReplayStats::default();
    for ev in events {
        if let Pacing::Speed(speed) = pacing {
            let t0 = *first.get_or_insert(ev.t_ms);
            let due = start + Duration::from_secs_f64((ev.t_ms - t0).max(0) as f64 / speed / 1000.0);
            let now = Instant::now();
            if due > now {
                std::thread::sleep(due - now);
            } else {
                stats.max_lag = stats.max_lag.max(now - due);
            }
        }
        sink(ev);
        stats.events += 1;
    }
    stats.wall = start.elapsed();
    stats
}
