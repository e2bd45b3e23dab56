//! Scenario schema and the built-in scenarios.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sprayq_aggregator::channels::*;
use sprayq_aggregator::sampling::SamplingConfig;

use crate::error::{Error, Result};

/// Closed interval `[lo, hi]`; a per-epoch value is drawn uniformly from it.
pub type Range = [f64; 2];

fn check_range(what: &str, r: Range) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
        return Err(Error::Scenario(format!("{what}: bad range [{}, {}]", r[0], r[1])));
    }
    Ok(())
}

/// `value = intercept + coef * source + noise`, evaluated on the source's
/// generated value at the same instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coupling {
    pub source: String,
    pub coef: f64,
    #[serde(default)]
    pub intercept: f64,
}

/// Rise-then-fall profile over a coating epoch, added to the set point.
/// Peaks `rise` above the set point at `peak_frac` of the epoch and loses
/// `fall_frac * rise` by the end. Between epochs the channel rests at the
/// set point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ramp {
    pub rise: Range,
    pub peak_frac: Range,
    pub fall_frac: Range,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelProfile {
    pub channel: String,
    pub target: f64,
    /// Per-epoch set point; `target` is used when absent.
    #[serde(default)]
    pub setpoint_range: Option<Range>,
    #[serde(default)]
    pub drift_amplitude: f64,
    #[serde(default = "default_drift_period")]
    pub drift_period_ms: f64,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default)]
    pub dropout_prob: f64,
    #[serde(default)]
    pub coupling: Option<Coupling>,
    #[serde(default)]
    pub ramp: Option<Ramp>,
}

fn default_drift_period() -> f64 {
    60_000.0
}

impl ChannelProfile {
    pub fn constant(channel: &str, target: f64) -> Self {
        ChannelProfile {
            channel: channel.into(),
            target,
            setpoint_range: None,
            drift_amplitude: 0.0,
            drift_period_ms: default_drift_period(),
            noise_sd: 0.0,
            dropout_prob: 0.0,
            coupling: None,
            ramp: None,
        }
    }

    fn noisy(channel: &str, target: f64, noise_sd: f64) -> Self {
        ChannelProfile { noise_sd, ..Self::constant(channel, target) }
    }

    fn designed(channel: &str, range: Range, noise_sd: f64) -> Self {
        ChannelProfile {
            setpoint_range: Some(range),
            ..Self::noisy(channel, 0.5 * (range[0] + range[1]), noise_sd)
        }
    }

    fn coupled(channel: &str, source: &str, coef: f64, intercept: f64, noise_sd: f64) -> Self {
        ChannelProfile {
            coupling: Some(Coupling { source: source.into(), coef, intercept }),
            ..Self::noisy(channel, 0.0, noise_sd)
        }
    }
}

/// Additive step on one channel during one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disturbance {
    pub channel: String,
    pub epoch: usize,
    /// Offset from the epoch start.
    pub offset_ms: i64,
    pub duration_ms: i64,
    pub delta: f64,
}

/// One channel reporting only Missing while one epoch is coating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outage {
    pub channel: String,
    pub epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticDesign {
    pub stand_off_distance: Range,
    pub coating_velocity: Range,
    pub powder_feed_rate: Range,
}

impl Default for StaticDesign {
    fn default() -> Self {
        StaticDesign {
            stand_off_distance: [250.0, 250.0],
            coating_velocity: [600.0, 600.0],
            powder_feed_rate: [60.0, 60.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimScenario {
    pub name: String,
    pub seed: u64,
    pub epoch_count: usize,
    pub epoch_duration_ms: i64,
    /// Idle time before each epoch and after the last one.
    pub idle_ms: i64,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub statics: StaticDesign,
    /// Generation order; a coupling source must come earlier.
    pub channels: Vec<ChannelProfile>,
    #[serde(default)]
    pub disturbances: Vec<Disturbance>,
    #[serde(default)]
    pub outages: Vec<Outage>,
}

impl SimScenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: SimScenario = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epoch_duration_ms <= 0 || self.idle_ms <= 0 {
            return Err(Error::Scenario("epoch_duration_ms and idle_ms must be positive".into()));
        }
        let s = &self.sampling;
        if s.idle_interval_ms <= 0 || s.coating_interval_ms <= 0 {
            return Err(Error::Scenario("sampling intervals must be positive".into()));
        }
        if s.watchdog_ms <= s.coating_interval_ms {
            return Err(Error::Scenario("watchdog must exceed the coating interval".into()));
        }
        check_range("statics.stand_off_distance", self.statics.stand_off_distance)?;
        check_range("statics.coating_velocity", self.statics.coating_velocity)?;
        check_range("statics.powder_feed_rate", self.statics.powder_feed_rate)?;
        let mut seen = BTreeSet::new();
        for p in &self.channels {
            let id = p.channel.as_str();
            if id == ROBOT_STATUS || id.starts_with("job_") {
                return Err(Error::Scenario(format!("{id}: reserved channel name")));
            }
            if let Some(r) = p.setpoint_range {
                check_range(id, r)?;
            }
            if !(p.noise_sd >= 0.0) || !(p.drift_amplitude.is_finite()) || !(p.drift_period_ms > 0.0) {
                return Err(Error::Scenario(format!("{id}: noise, drift amplitude or drift period out of range")));
            }
            if !(0.0..=1.0).contains(&p.dropout_prob) {
                return Err(Error::Scenario(format!("{id}: dropout_prob must lie in [0, 1]")));
            }
            if let Some(c) = &p.coupling {
                if !seen.contains(c.source.as_str()) {
                    return Err(Error::Scenario(format!(
                        "{id}: coupling source {} must be an earlier channel",
                        c.source
                    )));
                }
                if p.setpoint_range.is_some() {
                    return Err(Error::Scenario(format!("{id}: a coupled channel has no set point of its own")));
                }
            }
            if let Some(r) = &p.ramp {
                check_range(&format!("{id}.ramp.rise"), r.rise)?;
                check_range(&format!("{id}.ramp.peak_frac"), r.peak_frac)?;
                check_range(&format!("{id}.ramp.fall_frac"), r.fall_frac)?;
                if !(r.peak_frac[0] > 0.0 && r.peak_frac[1] < 1.0) {
                    return Err(Error::Scenario(format!("{id}: peak_frac must lie inside (0, 1)")));
                }
            }
            if !seen.insert(id) {
                return Err(Error::Scenario(format!("{id}: duplicate channel")));
            }
        }
        for d in &self.disturbances {
            if !seen.contains(d.channel.as_str()) {
                return Err(Error::Scenario(format!("disturbance on unknown channel {}", d.channel)));
            }
            if d.epoch >= self.epoch_count || d.duration_ms <= 0 || d.offset_ms < 0 {
                return Err(Error::Scenario(format!(
                    "disturbance on {}: epoch {} / offset {} / duration {} out of range",
                    d.channel, d.epoch, d.offset_ms, d.duration_ms
                )));
            }
        }
        for o in &self.outages {
            if !seen.contains(o.channel.as_str()) || o.epoch >= self.epoch_count {
                return Err(Error::Scenario(format!("outage on {} in epoch {} out of range", o.channel, o.epoch)));
            }
        }
        Ok(())
    }

    pub fn profile(&self, channel: &str) -> Option<&ChannelProfile> {
        self.channels.iter().find(|p| p.channel == channel)
    }

    pub fn profile_mut(&mut self, channel: &str) -> Option<&mut ChannelProfile> {
        self.channels.iter_mut().find(|p| p.channel == channel)
    }

    /// Every standard channel held at its nominal value: no noise, drift or
    /// dropout.
    pub fn steady(seed: u64) -> Self {
        SimScenario {
            name: "steady".into(),
            seed,
            epoch_count: 1,
            epoch_duration_ms: 10_000,
            idle_ms: 2_000,
            sampling: SamplingConfig::default(),
            statics: StaticDesign::default(),
            channels: standard_channels()
                .iter()
                .map(|c| ChannelProfile::constant(&c.id, c.target_value))
                .collect(),
            disturbances: Vec::new(),
            outages: Vec::new(),
        }
    }

    /// Designed experiment used to build the benchmark dataset. Six factors
    /// vary between epochs: the three job parameters, the fuel and oxygen set
    /// points and the component start temperature. Gas pressures follow
    /// their flows, the pyrometer ramps within each epoch, and every other
    /// channel is held at its nominal value so it carries no between-epoch
    /// variation.
    pub fn benchmark(seed: u64, epoch_count: usize) -> Self {
        type P = ChannelProfile;
        let channels = vec![
            P::constant(ENV_AIR_PRESSURE, 1013.0),
            P::constant(ENV_HUMIDITY, 45.0),
            P::constant(ENV_TEMPERATURE, 22.0),
            P::constant(COOLING_TEMPERATURE, 18.0),
            P::constant(COOLING_FLOW, 60.0),
            P { drift_amplitude: 0.3, ..P::designed(FUEL_FLOW, [54.0, 66.0], 0.3) },
            P::designed(OXYGEN_FLOW, [259.0, 317.0], 1.2),
            P::constant(SHROUD_FLOW, 450.0),
            P::coupled(FUEL_INLET_PRESSURE, FUEL_FLOW, 0.1, 1.0, 0.02),
            P::coupled(FUEL_OUTLET_PRESSURE, FUEL_INLET_PRESSURE, 0.75, 0.25, 0.02),
            P::coupled(OXYGEN_INLET_PRESSURE, OXYGEN_FLOW, 0.03, 1.36, 0.03),
            P::coupled(OXYGEN_OUTLET_PRESSURE, OXYGEN_INLET_PRESSURE, 0.8, 0.0, 0.03),
            P::constant(SHROUD_INLET_PRESSURE, 6.0),
            P::constant(SHROUD_OUTLET_PRESSURE, 4.5),
            P::constant(PROPANE_TEMPERATURE, 25.0),
            P::constant(AIRJET_FLOW, 120.0),
            P {
                ramp: Some(Ramp {
                    rise: [60.0, 60.0],
                    peak_frac: [0.7, 0.7],
                    fall_frac: [0.3, 0.3],
                }),
                ..P::designed(PYRO_TEMPERATURE, [120.0, 170.0], 0.5)
            },
            P::constant(LATHE_SPEED, 80.0),
        ];
        SimScenario {
            name: "benchmark".into(),
            seed,
            epoch_count,
            epoch_duration_ms: 30_000,
            idle_ms: 5_000,
            sampling: SamplingConfig::default(),
            statics: StaticDesign {
                stand_off_distance: [200.0, 300.0],
                coating_velocity: [450.0, 750.0],
                powder_feed_rate: [45.0, 75.0],
            },
            channels,
            disturbances: Vec::new(),
            outages: Vec::new(),
        }
    }

    /// Oxygen slaved to fuel (`oxygen = 4.8 * fuel + noise`) with a varying
    /// fuel set point; the last epoch loses the oxygen sensor entirely.
    pub fn oxygen_dropout(seed: u64, oxygen_noise_sd: f64) -> Self {
        let mut s = Self::steady(seed);
        s.name = "oxygen_dropout".into();
        s.epoch_count = 4;
        s.epoch_duration_ms = 20_000;
        let fuel = s.profile_mut(FUEL_FLOW).unwrap();
        fuel.setpoint_range = Some([54.0, 66.0]);
        fuel.drift_amplitude = 2.0;
        fuel.drift_period_ms = 7_000.0;
        fuel.noise_sd = 0.5;
        let oxy = s.profile_mut(OXYGEN_FLOW).unwrap();
        oxy.coupling = Some(Coupling { source: FUEL_FLOW.into(), coef: 4.8, intercept: 0.0 });
        oxy.noise_sd = oxygen_noise_sd;
        let pyro = s.profile_mut(PYRO_TEMPERATURE).unwrap();
        pyro.ramp = Some(Ramp { rise: [60.0, 60.0], peak_frac: [0.7, 0.7], fall_frac: [0.3, 0.3] });
        s.outages.push(Outage { channel: OXYGEN_FLOW.into(), epoch: 3 });
        s
    }

    /// Three epochs of a steady process; the middle one has the fuel flow
    /// stepped up for a stretch, the archetypal sudden supply disturbance.
    pub fn fuel_step(seed: u64) -> Self {
        let mut s = Self::steady(seed);
        s.name = "fuel_step".into();
        s.epoch_count = 3;
        s.epoch_duration_ms = 60_000;
        for p in &mut s.channels {
            p.noise_sd = 0.002 * p.target.abs();
        }
        let pyro = s.profile_mut(PYRO_TEMPERATURE).unwrap();
        pyro.ramp = Some(Ramp { rise: [60.0, 60.0], peak_frac: [0.7, 0.7], fall_frac: [0.3, 0.3] });
        s.disturbances.push(Disturbance {
            channel: FUEL_FLOW.into(),
            epoch: 1,
            offset_ms: 10_000,
            duration_ms: 25_000,
            delta: 12.0,
        });
        s
    }

    /// The benchmark process held at the centre of its design, with the fuel
    /// flow raised by [`FUEL_EXCURSION`] for the whole of epochs 1 and 3 and
    /// the oxygen flow raised with it so lambda stays put. Each excursion
    /// stays inside the range the benchmark design covers, so models trained
    /// on it are not extrapolating.
    pub fn hardness_excursion(seed: u64) -> Self {
        let mut s = Self::benchmark(seed, 5);
        s.name = "hardness_excursion".into();
        for r in [
            &mut s.statics.stand_off_distance,
            &mut s.statics.coating_velocity,
            &mut s.statics.powder_feed_rate,
        ] {
            *r = [(r[0] + r[1]) / 2.0; 2];
        }
        for p in &mut s.channels {
            if let Some(r) = &mut p.setpoint_range {
                *r = [(r[0] + r[1]) / 2.0; 2];
            }
        }
        let oxygen_per_fuel = s.profile(OXYGEN_FLOW).and_then(|p| p.setpoint_range).unwrap()[0]
            / s.profile(FUEL_FLOW).and_then(|p| p.setpoint_range).unwrap()[0];
        for epoch in [1, 3] {
            for (channel, delta) in [(FUEL_FLOW, FUEL_EXCURSION), (OXYGEN_FLOW, oxygen_per_fuel * FUEL_EXCURSION)] {
                s.disturbances.push(Disturbance {
                    channel: channel.into(),
                    epoch,
                    offset_ms: 0,
                    duration_ms: s.epoch_duration_ms,
                    delta,
                });
            }
        }
        s
    }
}

/// Fuel flow offset of the scripted hardness excursions, l/min.
pub const FUEL_EXCURSION: f64 = 5.0;
