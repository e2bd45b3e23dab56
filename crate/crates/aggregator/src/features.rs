//! The 27-feature record and its per-group applicability masks.

use serde::{Deserialize, Serialize};
use sprayq_core::TargetGroup;

use crate::channels::*;
use crate::error::{Error, Result};
use crate::impute::CompletedTable;

pub const FEATURE_COUNT: usize = 27;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "env_air_pressure_avg",
    "env_humidity_avg",
    "env_temperature_avg",
    "stand_off_distance",
    "coating_velocity",
    "powder_feed_rate",
    "cooling_temperature_avg",
    "cooling_flow_avg",
    "fuel_flow_avg",
    "oxygen_flow_avg",
    "shroud_flow_avg",
    "fuel_inlet_pressure_avg",
    "fuel_outlet_pressure_avg",
    "oxygen_inlet_pressure_avg",
    "oxygen_outlet_pressure_avg",
    "shroud_inlet_pressure_avg",
    "shroud_outlet_pressure_avg",
    "propane_temperature_avg",
    "airjet_flow_avg",
    "lambda",
    "pyro_max_temperature",
    "pyro_heat_up_rate",
    "pyro_cool_down_rate",
    "pyro_start_temperature",
    "fuel_flow_std",
    "oxygen_flow_std",
    "shroud_flow_std",
];

/// Channels whose time-weighted averages fill features 1-3, 7-19 in order.
const AVERAGED: [(usize, &str); 16] = [
    (0, ENV_AIR_PRESSURE),
    (1, ENV_HUMIDITY),
    (2, ENV_TEMPERATURE),
    (6, COOLING_TEMPERATURE),
    (7, COOLING_FLOW),
    (8, FUEL_FLOW),
    (9, OXYGEN_FLOW),
    (10, SHROUD_FLOW),
    (11, FUEL_INLET_PRESSURE),
    (12, FUEL_OUTLET_PRESSURE),
    (13, OXYGEN_INLET_PRESSURE),
    (14, OXYGEN_OUTLET_PRESSURE),
    (15, SHROUD_INLET_PRESSURE),
    (16, SHROUD_OUTLET_PRESSURE),
    (17, PROPANE_TEMPERATURE),
    (18, AIRJET_FLOW),
];

const STD_DEV: [(usize, &str); 3] = [(24, FUEL_FLOW), (25, OXYGEN_FLOW), (26, SHROUD_FLOW)];

/// Zero-based indices of the features used for a target group.
pub fn feature_indices(group: TargetGroup) -> Vec<usize> {
    match group {
        // stand-off, powder feed rate, gas flows through lambda
        TargetGroup::Pip => std::iter::once(3).chain(std::iter::once(5)).chain(8..20).collect(),
        // everything except the environment
        TargetGroup::Ppp => (3..FEATURE_COUNT).collect(),
        TargetGroup::Cqp => (0..FEATURE_COUNT).collect(),
    }
}

pub fn feature_mask(group: TargetGroup) -> [bool; FEATURE_COUNT] {
    let mut mask = [false; FEATURE_COUNT];
    for i in feature_indices(group) {
        mask[i] = true;
    }
    mask
}

pub fn feature_names(group: TargetGroup) -> Vec<String> {
    feature_indices(group).into_iter().map(|i| FEATURE_NAMES[i].to_string()).collect()
}

/// Job parameters that are set, not measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticParams {
    pub stand_off_distance: f64,
    pub coating_velocity: f64,
    pub powder_feed_rate: f64,
}

impl Default for StaticParams {
    fn default() -> Self {
        StaticParams {
            stand_off_distance: 250.0,
            coating_velocity: 600.0,
            powder_feed_rate: 60.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    /// Stoichiometric oxygen-to-fuel volume ratio.
    pub r_stoich: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig { r_stoich: 5.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureFlags {
    /// Maximum at the first reading; heat-up rate set to 0.
    pub heat_up_undefined: bool,
    /// Maximum at the last reading; cool-down rate set to 0.
    pub cool_down_undefined: bool,
    pub imputed_channels: Vec<String>,
    /// Time from the pyrometer maximum to the last reading. While an epoch
    /// is still open a small value means the peak may not be reached yet.
    #[serde(default)]
    pub pyro_peak_age_ms: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub flags: FeatureFlags,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES.iter().position(|n| *n == name).map(|i| self.values[i])
    }

    pub fn select(&self, group: TargetGroup) -> Vec<f64> {
        feature_indices(group).into_iter().map(|i| self.values[i]).collect()
    }
}

/// Hold weights: each grid value lasts until the next grid instant, the last
/// one until the epoch end.
fn hold_weights(table: &CompletedTable) -> Vec<f64> {
    let n = table.rows();
    (0..n)
        .map(|i| {
            let next = if i + 1 < n { table.t_ms[i + 1] } else { table.end_ms };
            (next.min(table.end_ms) - table.t_ms[i]).max(0) as f64
        })
        .collect()
}

pub fn weighted_mean(values: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total
}

pub fn weighted_std(values: &[f64], weights: &[f64]) -> f64 {
    let m = weighted_mean(values, weights);
    let total: f64 = weights.iter().sum();
    (values.iter().zip(weights).map(|(v, w)| w * (v - m).powi(2)).sum::<f64>() / total).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PyroFeatures {
    pub start: f64,
    pub max: f64,
    /// Units per second.
    pub heat_up_rate: f64,
    /// Units per second.
    pub cool_down_rate: f64,
    pub heat_up_undefined: bool,
    pub cool_down_undefined: bool,
    pub peak_age_ms: i64,
}

/// `samples` are `(t_ms, value)` in time order. The maximum is taken at its
/// first occurrence.
pub fn pyro_features(samples: &[(i64, f64)]) -> Result<PyroFeatures> {
    let (&(t_start, start), &(t_end, end)) = match (samples.first(), samples.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::MissingChannel(PYRO_TEMPERATURE.into())),
    };
    let (t_max, max) = samples
        .iter()
        .copied()
        .fold((t_start, start), |best, s| if s.1 > best.1 { s } else { best });
    let rate = |dv: f64, dt_ms: i64| dv / (dt_ms as f64 / 1000.0);
    let heat_up_undefined = t_max == t_start;
    let cool_down_undefined = t_end == t_max;
    Ok(PyroFeatures {
        start,
        max,
        heat_up_rate: if heat_up_undefined { 0.0 } else { rate(max - start, t_max - t_start) },
        cool_down_rate: if cool_down_undefined { 0.0 } else { rate(end - max, t_end - t_max) },
        heat_up_undefined,
        cool_down_undefined,
        peak_age_ms: t_end - t_max,
    })
}

/// Features of one completed epoch. The pyrometer features come from
/// `pyro`; the averages and deviations from the table under zero-order hold.
pub fn extract_features(
    table: &CompletedTable,
    statics: &StaticParams,
    pyro: &[(i64, f64)],
    cfg: &FeatureConfig,
) -> Result<FeatureVector> {
    if table.rows() < 3 {
        return Err(Error::EpochTooShort { rows: table.rows() });
    }
    let w = hold_weights(table);
    let col = |ch: &str| table.column(ch).ok_or_else(|| Error::MissingChannel(ch.into()));
    let mut values = vec![0.0; FEATURE_COUNT];
    for (i, ch) in AVERAGED {
        values[i] = weighted_mean(col(ch)?, &w);
    }
    for (i, ch) in STD_DEV {
        values[i] = weighted_std(col(ch)?, &w);
    }
    values[3] = statics.stand_off_distance;
    values[4] = statics.coating_velocity;
    values[5] = statics.powder_feed_rate;
    let (fuel, oxygen) = (values[8], values[9]);
    if !(fuel > 0.0) {
        return Err(Error::NoFuel(fuel));
    }
    values[19] = oxygen / fuel / cfg.r_stoich;
    let p = pyro_features(pyro)?;
    values[20] = p.max;
    values[21] = p.heat_up_rate;
    values[22] = p.cool_down_rate;
    values[23] = p.start;
    Ok(FeatureVector {
        values,
        flags: FeatureFlags {
            heat_up_undefined: p.heat_up_undefined,
            cool_down_undefined: p.cool_down_undefined,
            imputed_channels: table.imputed_channels(),
            pyro_peak_age_ms: p.peak_age_ms,
        },
    })
}

/// [`extract_features`] with the pyrometer taken from the table's own column.
pub fn extract_from_table(table: &CompletedTable, statics: &StaticParams, cfg: &FeatureConfig) -> Result<FeatureVector> {
    let pyro: Vec<(i64, f64)> = table
        .column(PYRO_TEMPERATURE)
        .ok_or_else(|| Error::MissingChannel(PYRO_TEMPERATURE.into()))?
        .iter()
        .zip(&table.t_ms)
        .map(|(&v, &t)| (t, v))
        .collect();
    extract_features(table, statics, &pyro, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::impute::CellSource;

    fn completed(cols: Vec<(&str, Vec<f64>)>, step: i64) -> CompletedTable {
        let rows = cols[0].1.len();
        CompletedTable {
            start_ms: 0,
            end_ms: (rows as i64 - 1) * step,
            step_ms: step,
            t_ms: (0..rows as i64).map(|i| i * step).collect(),
            channels: cols.iter().map(|c| c.0.to_string()).collect(),
            sources: vec![vec![CellSource::Observed; rows]; cols.len()],
            columns: cols.into_iter().map(|c| c.1).collect(),
        }
    }

    #[test]
    fn step_signal_average_is_exact() {
        // 10 for 2 s then 20 for 2 s, 100 ms grid
        let v: Vec<f64> = (0..=40).map(|i| if i < 20 { 10.0 } else { 20.0 }).collect();
        let t = completed(vec![("a", v.clone())], 100);
        let w = hold_weights(&t);
        assert_eq!(weighted_mean(&v, &w), 15.0);
        assert_eq!(weighted_std(&v, &w), 5.0);
        let c = completed(vec![("a", vec![3.25; 10])], 100);
        assert_eq!(weighted_std(&c.columns[0], &hold_weights(&c)), 0.0);
    }

    #[test]
    fn pyro_ramp_then_flat() {
        let s: Vec<(i64, f64)> = (0..=300).map(|i| (i * 100, if i <= 200 { 300.0 + i as f64 } else { 500.0 })).collect();
        let p = pyro_features(&s).unwrap();
        assert_eq!(p.start, 300.0);
        assert_eq!(p.max, 500.0);
        assert!((p.heat_up_rate - 10.0).abs() < 1e-12);
        assert_eq!(p.cool_down_rate, 0.0);
        assert!(!p.heat_up_undefined && !p.cool_down_undefined);
    }

    #[test]
    fn pyro_sign_conventions_and_degenerate_cases() {
        let p = pyro_features(&[(0, 400.0), (1_000, 300.0), (2_000, 200.0)]).unwrap();
        assert!(p.heat_up_undefined);
        assert_eq!(p.heat_up_rate, 0.0);
        assert!((p.cool_down_rate + 100.0).abs() < 1e-12);
        let p = pyro_features(&[(0, 100.0), (2_000, 300.0)]).unwrap();
        assert!(p.cool_down_undefined && p.heat_up_rate == 100.0);
        assert!(pyro_features(&[]).is_err());
    }

    #[test]
    fn masks_match_reference_table() {
        // one-based feature numbers per group
        let pip: Vec<usize> = [4, 6, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20].to_vec();
        let ppp: Vec<usize> = (4..=27).collect();
        let cqp: Vec<usize> = (1..=27).collect();
        let one_based = |g| feature_indices(g).into_iter().map(|i| i + 1).collect::<Vec<_>>();
        assert_eq!(one_based(TargetGroup::Pip), pip);
        assert_eq!(one_based(TargetGroup::Ppp), ppp);
        assert_eq!(one_based(TargetGroup::Cqp), cqp);
        assert_eq!(FEATURE_NAMES.len(), 27);
        let mut uniq = FEATURE_NAMES.to_vec();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 27);
        assert_eq!(feature_mask(TargetGroup::Pip).iter().filter(|&&b| b).count(), 14);
    }

    #[test]
    fn short_epoch_rejected() {
        let t = completed(vec![("a", vec![1.0, 2.0])], 100);
        assert!(matches!(
            extract_features(&t, &StaticParams::default(), &[(0, 1.0)], &FeatureConfig::default()),
            Err(Error::EpochTooShort { rows: 2 })
        ));
    }
}
