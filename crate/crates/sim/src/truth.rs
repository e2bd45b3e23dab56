//! Known quality functions standing in for laboratory measurements.
//!
//! Per target, on features scaled as `z = (f - center) / scale`:
//!
//! ```text
//! g(f) = offset + amplitude * ( sum_k a_k z_k
//!                             + h * exp(-|z_B - c|^2 / (2 w^2))
//!                             + sum_(i,j) k_ij z_i z_j )
//! ```
//!
//! A linear part, one Gaussian bump over a few features and pairwise
//! interactions. Centers and scales are fixed constants, not fitted, so `g`
//! can be evaluated on any feature vector without reference to a dataset.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sprayq_aggregator::features::{feature_mask, FEATURE_NAMES};
use sprayq_core::QualityTarget;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureScale {
    pub center: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub features: Vec<String>,
    pub center: Vec<f64>,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interaction {
    pub a: String,
    pub b: String,
    pub coef: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetTruth {
    pub offset: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub linear: BTreeMap<String, f64>,
    #[serde(default)]
    pub bump: Option<Bump>,
    #[serde(default)]
    pub interactions: Vec<Interaction>,
    /// Label noise sd as a fraction of the range of `g` over the generated
    /// epochs.
    #[serde(default = "default_noise_frac")]
    pub noise_frac: f64,
}

fn default_noise_frac() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    pub scales: BTreeMap<String, FeatureScale>,
    pub targets: BTreeMap<QualityTarget, TargetTruth>,
}

fn feature_index(name: &str) -> Result<usize> {
    FEATURE_NAMES
        .iter()
        .position(|n| *n == name)
        .ok_or_else(|| Error::Truth(format!("unknown feature {name}")))
}

impl TargetTruth {
    fn features(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.linear.keys().map(String::as_str).collect();
        if let Some(b) = &self.bump {
            out.extend(b.features.iter().map(String::as_str));
        }
        for i in &self.interactions {
            out.push(&i.a);
            out.push(&i.b);
        }
        out
    }
}

impl GroundTruth {
    pub fn validate(&self) -> Result<()> {
        for (name, s) in &self.scales {
            feature_index(name)?;
            if !(s.scale > 0.0) || !s.center.is_finite() {
                return Err(Error::Truth(format!("{name}: scale must be positive")));
            }
        }
        for (t, tt) in &self.targets {
            let mask = feature_mask(t.group());
            for f in tt.features() {
                let i = feature_index(f)?;
                if !mask[i] {
                    return Err(Error::Truth(format!("{t}: feature {f} is not visible to its group")));
                }
                if !self.scales.contains_key(f) {
                    return Err(Error::Truth(format!("{t}: feature {f} has no scale")));
                }
            }
            if let Some(b) = &tt.bump {
                if b.center.len() != b.features.len() || !(b.width > 0.0) {
                    return Err(Error::Truth(format!("{t}: bump needs one center per feature and a positive width")));
                }
            }
            if !(tt.noise_frac >= 0.0) {
                return Err(Error::Truth(format!("{t}: noise_frac must be non-negative")));
            }
        }
        Ok(())
    }

    /// Noise-free label of one 27-feature vector.
    pub fn eval(&self, target: QualityTarget, features: &[f64]) -> Result<f64> {
        let tt = self
            .targets
            .get(&target)
            .ok_or_else(|| Error::Truth(format!("no ground truth for {target}")))?;
        let z = |name: &str| -> Result<f64> {
            let s = &self.scales[name];
            Ok((features[feature_index(name)?] - s.center) / s.scale)
        };
        let mut g = 0.0;
        for (f, a) in &tt.linear {
            g += a * z(f)?;
        }
        if let Some(b) = &tt.bump {
            let mut d2 = 0.0;
            for (f, c) in b.features.iter().zip(&b.center) {
                d2 += (z(f)? - c).powi(2);
            }
            g += b.height * (-d2 / (2.0 * b.width * b.width)).exp();
        }
        for i in &tt.interactions {
            g += i.coef * z(&i.a)? * z(&i.b)?;
        }
        Ok(tt.offset + tt.amplitude * g)
    }

    /// Ground truth paired with [`crate::SimScenario::benchmark`]: scales are
    /// the centers and half-widths of that design.
    pub fn benchmark() -> Self {
        use QualityTarget::*;
        let scales = [
            ("env_air_pressure_avg", 1013.0, 13.0),
            ("env_humidity_avg", 45.0, 10.0),
            ("env_temperature_avg", 22.0, 3.0),
            ("stand_off_distance", 250.0, 50.0),
            ("coating_velocity", 600.0, 150.0),
            ("powder_feed_rate", 60.0, 15.0),
            ("cooling_temperature_avg", 18.0, 2.0),
            ("fuel_flow_avg", 60.0, 6.0),
            ("oxygen_flow_avg", 288.0, 29.0),
            ("shroud_flow_avg", 450.0, 50.0),
            ("airjet_flow_avg", 120.0, 10.0),
            ("propane_temperature_avg", 25.0, 3.0),
            ("lambda", 0.96, 0.12),
            ("pyro_max_temperature", 210.0, 40.0),
            ("pyro_heat_up_rate", 3.2, 1.5),
        ]
        .into_iter()
        .map(|(n, center, scale)| (n.to_string(), FeatureScale { center, scale }))
        .collect();
        let lin = |terms: &[(&str, f64)]| terms.iter().map(|(n, a)| (n.to_string(), *a)).collect();
        let bump = |features: &[&str], center: &[f64], width: f64, height: f64| {
            Some(Bump {
                features: features.iter().map(|s| s.to_string()).collect(),
                center: center.to_vec(),
                width,
                height,
            })
        };
        let inter = |a: &str, b: &str, coef: f64| Interaction { a: a.into(), b: b.into(), coef };
        let t = |offset, amplitude, linear, bump, interactions| TargetTruth {
            offset,
            amplitude,
            linear,
            bump,
            interactions,
            noise_frac: default_noise_frac(),
        };
        let mut targets = BTreeMap::new();
        targets.insert(
            ParticleVelocity,
            t(
                620.0,
                25.0,
                lin(&[("fuel_flow_avg", 0.6), ("stand_off_distance", -0.4)]),
                bump(&["lambda", "fuel_flow_avg"], &[0.3, -0.2], 0.7, 1.5),
                vec![inter("lambda", "stand_off_distance", 2.0)],
            ),
        );
        targets.insert(
            ParticleTemperature,
            t(
                1850.0,
                40.0,
                lin(&[("lambda", -0.5), ("powder_feed_rate", -0.3)]),
                bump(&["lambda", "shroud_flow_avg"], &[0.0, 0.3], 0.7, 1.8),
                vec![inter("fuel_flow_avg", "powder_feed_rate", -0.7)],
            ),
        );
        targets.insert(
            DepositionRate,
            t(
                12.0,
                1.2,
                lin(&[("powder_feed_rate", 0.8), ("coating_velocity", -0.3)]),
                bump(&["stand_off_distance", "lambda"], &[-0.2, 0.2], 0.7, 1.5),
                vec![inter("powder_feed_rate", "fuel_flow_avg", 0.6)],
            ),
        );
        targets.insert(
            DepositionEfficiency,
            t(
                55.0,
                4.0,
                lin(&[("stand_off_distance", -0.6), ("pyro_max_temperature", 0.3)]),
                bump(&["lambda", "coating_velocity"], &[0.2, 0.0], 0.7, 1.6),
                vec![inter("stand_off_distance", "fuel_flow_avg", -0.7)],
            ),
        );
        targets.insert(
            CoatingThickness,
            t(
                45.0,
                5.0,
                lin(&[("powder_feed_rate", 0.7), ("coating_velocity", -0.6)]),
                bump(&["pyro_max_temperature", "lambda"], &[0.2, -0.2], 0.7, 1.4),
                vec![inter("coating_velocity", "powder_feed_rate", -0.6)],
            ),
        );
        targets.insert(
            CoatingRoughness,
            t(
                4.0,
                0.5,
                lin(&[("stand_off_distance", 0.5), ("fuel_flow_avg", -0.4)]),
                bump(&["lambda", "env_humidity_avg"], &[-0.2, 0.3], 0.7, 1.4),
                vec![inter("stand_off_distance", "coating_velocity", 0.6)],
            ),
        );
        targets.insert(
            CoatingHardness,
            t(
                11.0,
                0.6,
                lin(&[("fuel_flow_avg", 0.5), ("stand_off_distance", -0.3), ("powder_feed_rate", 0.2)]),
                bump(&["lambda", "coating_velocity"], &[0.2, -0.1], 0.7, 1.5),
                vec![inter("fuel_flow_avg", "stand_off_distance", 0.8)],
            ),
        );
        targets.insert(
            CoatingPorosity,
            t(
                1.6,
                0.35,
                lin(&[("lambda", 0.4), ("fuel_flow_avg", -0.5)]),
                bump(&["stand_off_distance", "pyro_max_temperature"], &[0.2, -0.3], 0.7, 1.5),
                vec![inter("lambda", "fuel_flow_avg", -0.6)],
            ),
        );
        GroundTruth { scales, targets }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sprayq_aggregator::features::FEATURE_COUNT;

    fn centered(truth: &GroundTruth) -> Vec<f64> {
        let mut f = vec![0.0; FEATURE_COUNT];
        for (name, s) in &truth.scales {
            f[feature_index(name).unwrap()] = s.center;
        }
        f
    }

    #[test]
    fn benchmark_truth_is_valid() {
        GroundTruth::benchmark().validate().unwrap();
    }

    #[test]
    fn eval_at_center_is_offset_plus_bump() {
        let truth = GroundTruth::benchmark();
        let f = centered(&truth);
        let tt = &truth.targets[&QualityTarget::CoatingHardness];
        let b = tt.bump.as_ref().unwrap();
        let d2: f64 = b.center.iter().map(|c| c * c).sum();
        let want = tt.offset + tt.amplitude * b.height * (-d2 / (2.0 * b.width * b.width)).exp();
        let got = truth.eval(QualityTarget::CoatingHardness, &f).unwrap();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn rejects_feature_hidden_from_group() {
        let mut truth = GroundTruth::benchmark();
        let pv = truth.targets.get_mut(&QualityTarget::ParticleVelocity).unwrap();
        pv.linear.insert("env_humidity_avg".into(), 1.0);
        assert!(truth.validate().is_err());
    }

    #[test]
    fn interaction_is_bilinear() {
        let truth = GroundTruth::benchmark();
        let mut f = centered(&truth);
        let tt = &truth.targets[&QualityTarget::CoatingHardness];
        let g0 = truth.eval(QualityTarget::CoatingHardness, &f).unwrap();
        let i = feature_index("stand_off_distance").unwrap();
        f[i] += 50.0;
        let j = feature_index("fuel_flow_avg").unwrap();
        f[j] += 6.0;
        let g1 = truth.eval(QualityTarget::CoatingHardness, &f).unwrap();
        let want = tt.amplitude * (0.5 - 0.3 + 0.8);
        assert!((g1 - g0 - want).abs() < 1e-12);
    }
}
