//! Scenario to wire events.
//!
//! Random streams: stream 0 draws the per-epoch design (job parameters, set
//! points, ramp shapes, drift phases); channel `i` draws its noise and
//! dropouts from stream `i + 1`. A channel's draws therefore do not depend on
//! the noise settings of any other channel.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sprayq_aggregator::channels::*;
use sprayq_aggregator::sampling::{poll_schedule, EpochMarker};
use sprayq_aggregator::{SensorEvent, StaticParams};

use crate::error::Result;
use crate::scenario::{Range, SimScenario};

#[derive(Debug, Clone, PartialEq)]
pub struct EpochPlan {
    pub index: usize,
    pub start_ms: i64,
    pub end_ms: i64,
    pub statics: StaticParams,
    /// Per-epoch set point of every channel that has one.
    pub setpoints: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub events: Vec<SensorEvent>,
    /// Per event: the value before the channel's own noise was added, that
    /// is its conditional mean given its sources. `None` for status and job
    /// events.
    pub clean: Vec<Option<f64>>,
    pub epochs: Vec<EpochPlan>,
}

impl SimRun {
    /// Good raw readings of one channel within `[t0, t1)`.
    pub fn readings(&self, channel: &str, t0: i64, t1: i64) -> Vec<(i64, f64)> {
        self.events
            .iter()
            .filter(|e| e.channel == channel && e.t_ms >= t0 && e.t_ms < t1)
            .filter_map(|e| e.reading().map(|v| (e.t_ms, v)))
            .collect()
    }
}

struct RampDraw {
    rise: f64,
    peak_frac: f64,
    fall_frac: f64,
}

struct Design {
    statics: StaticParams,
    setpoint: Vec<f64>,
    ramp: Vec<Option<RampDraw>>,
}

fn draw(rng: &mut ChaCha8Rng, r: Range) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..=r[1])
    }
}

fn ramp_value(r: &RampDraw, u: f64) -> f64 {
    if u <= r.peak_frac {
        r.rise * u / r.peak_frac
    } else {
        r.rise * (1.0 - r.fall_frac * (u - r.peak_frac) / (1.0 - r.peak_frac))
    }
}

pub fn generate_stream(s: &SimScenario) -> Result<SimRun> {
    s.validate()?;
    let mut design_rng = ChaCha8Rng::seed_from_u64(s.seed);
    design_rng.set_stream(0);
    let phases: Vec<f64> = s
        .channels
        .iter()
        .map(|_| design_rng.random_range(0.0..std::f64::consts::TAU))
        .collect();
    let designs: Vec<Design> = (0..s.epoch_count)
        .map(|_| Design {
            statics: StaticParams {
                stand_off_distance: draw(&mut design_rng, s.statics.stand_off_distance),
                coating_velocity: draw(&mut design_rng, s.statics.coating_velocity),
                powder_feed_rate: draw(&mut design_rng, s.statics.powder_feed_rate),
            },
            setpoint: s
                .channels
                .iter()
                .map(|p| p.setpoint_range.map_or(p.target, |r| draw(&mut design_rng, r)))
                .collect(),
            ramp: s
                .channels
                .iter()
                .map(|p| {
                    p.ramp.as_ref().map(|r| RampDraw {
                        rise: draw(&mut design_rng, r.rise),
                        peak_frac: draw(&mut design_rng, r.peak_frac),
                        fall_frac: draw(&mut design_rng, r.fall_frac),
                    })
                })
                .collect(),
        })
        .collect();
    let mut noise_rng: Vec<ChaCha8Rng> = (0..s.channels.len())
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(s.seed);
            r.set_stream(i as u64 + 1);
            r
        })
        .collect();
    let noise: Vec<Option<Normal<f64>>> = s
        .channels
        .iter()
        .map(|p| (p.noise_sd > 0.0).then(|| Normal::new(0.0, p.noise_sd).expect("validated sd")))
        .collect();
    let index: BTreeMap<&str, usize> = s.channels.iter().enumerate().map(|(i, p)| (p.channel.as_str(), i)).collect();

    let period = s.idle_ms + s.epoch_duration_ms;
    let nominal_start = |k: usize| k as i64 * period + s.idle_ms;
    let t_end = s.epoch_count as i64 * period + s.idle_ms;
    let coating_at = |t: i64| {
        let k = t / period;
        (k as usize) < s.epoch_count && t - k * period >= s.idle_ms
    };
    let schedule = poll_schedule(s.sampling, 0, t_end, coating_at);

    let job_events = |t: i64, d: &Design| {
        [
            SensorEvent::good(JOB_STAND_OFF_DISTANCE, t, d.statics.stand_off_distance),
            SensorEvent::good(JOB_COATING_VELOCITY, t, d.statics.coating_velocity),
            SensorEvent::good(JOB_POWDER_FEED_RATE, t, d.statics.powder_feed_rate),
        ]
    };

    let mut events = Vec::new();
    let mut clean = Vec::new();
    let mut epochs: Vec<EpochPlan> = Vec::new();
    let mut plan = 0usize;
    let mut open: Option<(usize, i64)> = None;
    let mut values = vec![0.0; s.channels.len()];
    if let Some(d) = designs.first() {
        for e in job_events(0, d) {
            events.push(e);
            clean.push(None);
        }
    }
    for (t, _, marker) in schedule {
        let coating = coating_at(t);
        let mut after_status = Vec::new();
        match marker {
            Some(EpochMarker::Start { t_ms, .. }) => open = Some((plan, t_ms)),
            Some(EpochMarker::End { t_ms, .. }) => {
                let (k, start) = open.take().expect("end follows start");
                let setpoints = s
                    .channels
                    .iter()
                    .zip(&designs[k].setpoint)
                    .filter(|(p, _)| p.setpoint_range.is_some())
                    .map(|(p, &v)| (p.channel.clone(), v))
                    .collect();
                epochs.push(EpochPlan {
                    index: k,
                    start_ms: start,
                    end_ms: t_ms,
                    statics: designs[k].statics,
                    setpoints,
                });
                if k + 1 < designs.len() {
                    plan = k + 1;
                    after_status.extend(job_events(t, &designs[plan]));
                }
            }
            None => {}
        }
        events.push(SensorEvent::good(ROBOT_STATUS, t, if coating { STATUS_COATING } else { STATUS_IDLE }));
        clean.push(None);
        for e in after_status {
            events.push(e);
            clean.push(None);
        }
        let d = &designs[plan.min(designs.len().saturating_sub(1))];
        for (i, p) in s.channels.iter().enumerate() {
            let mut base = match &p.coupling {
                Some(c) => c.intercept + c.coef * values[index[c.source.as_str()]],
                None => d.setpoint[i],
            };
            base += p.drift_amplitude * (std::f64::consts::TAU * t as f64 / p.drift_period_ms + phases[i]).sin();
            if let (Some((k, start)), true) = (open, coating) {
                if let Some(r) = &designs[k].ramp[i] {
                    let u = (t - start) as f64 / s.epoch_duration_ms as f64;
                    base += ramp_value(r, u.min(1.0));
                }
                let rel = t - nominal_start(k);
                for dist in s.disturbances.iter().filter(|x| x.channel == p.channel && x.epoch == k) {
                    if rel >= dist.offset_ms && rel < dist.offset_ms + dist.duration_ms {
                        base += dist.delta;
                    }
                }
            }
            let rng = &mut noise_rng[i];
            let v = base + noise[i].map_or(0.0, |n| n.sample(rng));
            values[i] = v;
            let mut dropped = p.dropout_prob > 0.0 && rng.random::<f64>() < p.dropout_prob;
            if let (Some((k, _)), true) = (open, coating) {
                dropped |= s.outages.iter().any(|o| o.channel == p.channel && o.epoch == k);
            }
            events.push(if dropped {
                SensorEvent::missing(p.channel.clone(), t)
            } else {
                SensorEvent::good(p.channel.clone(), t, v)
            });
            clean.push(Some(base));
        }
    }
    Ok(SimRun { events, clean, epochs })
}
