//! Per-target quality limits, set per application and changeable at runtime.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sprayq_core::QualityTarget;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    AboveUpper,
    BelowLower,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetLimits {
    #[serde(default)]
    pub lower: Option<f64>,
    #[serde(default)]
    pub upper: Option<f64>,
}

impl TargetLimits {
    pub fn new(lower: Option<f64>, upper: Option<f64>) -> Result<Self> {
        let l = TargetLimits { lower, upper };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        for v in [self.lower, self.upper].into_iter().flatten() {
            if !v.is_finite() {
                return Err(Error::Limits(format!("limit {v} is not finite")));
            }
        }
        if let (Some(l), Some(u)) = (self.lower, self.upper) {
            if !(l < u) {
                return Err(Error::Limits(format!("lower {l} must be below upper {u}")));
            }
        }
        Ok(())
    }

    /// Which limit `value` violates; boundaries count as inside.
    pub fn check(&self, value: f64) -> Option<Direction> {
        if self.upper.is_some_and(|u| value > u) {
            Some(Direction::AboveUpper)
        } else if self.lower.is_some_and(|l| value < l) {
            Some(Direction::BelowLower)
        } else {
            None
        }
    }
}

/// Targets without an entry are unconstrained.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QualityLimits(pub BTreeMap<QualityTarget, TargetLimits>);

impl QualityLimits {
    pub fn validate(&self) -> Result<()> {
        for (t, l) in &self.0 {
            l.validate().map_err(|e| Error::Limits(format!("{t}: {e}")))?;
        }
        Ok(())
    }

    pub fn get(&self, target: QualityTarget) -> TargetLimits {
        self.0.get(&target).copied().unwrap_or_default()
    }

    pub fn set(&mut self, target: QualityTarget, limits: TargetLimits) -> Result<()> {
        limits.validate()?;
        self.0.insert(target, limits);
        Ok(())
    }

    pub fn check(&self, target: QualityTarget, value: f64) -> Option<Direction> {
        self.get(target).check(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inverted_or_equal_bounds() {
        assert!(TargetLimits::new(Some(2.0), Some(1.0)).is_err());
        assert!(TargetLimits::new(Some(1.0), Some(1.0)).is_err());
        assert!(TargetLimits::new(Some(f64::NAN), None).is_err());
        assert!(TargetLimits::new(Some(1.0), None).is_ok());
    }

    #[test]
    fn check_sides() {
        let l = TargetLimits::new(Some(10.0), Some(12.0)).unwrap();
        assert_eq!(l.check(12.5), Some(Direction::AboveUpper));
        assert_eq!(l.check(9.0), Some(Direction::BelowLower));
        assert_eq!(l.check(12.0), None);
        assert_eq!(TargetLimits::default().check(1e300), None);
    }

    #[test]
    fn json_shape_is_a_target_map() {
        let mut q = QualityLimits::default();
        q.set(QualityTarget::CoatingHardness, TargetLimits::new(None, Some(12.0)).unwrap()).unwrap();
        let s = serde_json::to_string(&q).unwrap();
        assert_eq!(s, r#"{"coating_hardness":{"lower":null,"upper":12.0}}"#);
        let back: QualityLimits = serde_json::from_str(&s).unwrap();
        assert_eq!(back, q);
    }
}
