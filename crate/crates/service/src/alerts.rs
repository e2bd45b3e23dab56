//! Edge-triggered alerting on predictions leaving their limits.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sprayq_core::QualityTarget;

use crate::limits::Direction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertEvent {
    pub id: u64,
    pub target: QualityTarget,
    pub direction: Direction,
    pub value: f64,
    pub t_ms: i64,
    pub epoch: u64,
    pub acknowledged: bool,
}

/// One alert per in-limits to out-of-limits transition of a target. A single
/// in-limits prediction re-arms it.
#[derive(Debug, Clone, Default)]
pub struct AlertTracker {
    /// Absent means in limits, the state before any prediction.
    out: BTreeMap<QualityTarget, bool>,
    alerts: Vec<AlertEvent>,
    next_id: u64,
}

impl AlertTracker {
    pub fn observe(
        &mut self,
        target: QualityTarget,
        violation: Option<Direction>,
        value: f64,
        t_ms: i64,
        epoch: u64,
    ) -> Option<AlertEvent> {
        let was_out = self.out.insert(target, violation.is_some()).unwrap_or(false);
        let direction = violation?;
        if was_out {
            return None;
        }
        self.next_id += 1;
        let a = AlertEvent {
            id: self.next_id,
            target,
            direction,
            value,
            t_ms,
            epoch,
            acknowledged: false,
        };
        self.alerts.push(a.clone());
        Some(a)
    }

    pub fn alerts(&self) -> &[AlertEvent] {
        &self.alerts
    }

    /// Returns the updated alert, `None` for an unknown id.
    pub fn acknowledge(&mut self, id: u64) -> Option<AlertEvent> {
        let a = self.alerts.iter_mut().find(|a| a.id == id)?;
        a.acknowledged = true;
        Some(a.clone())
    }

    pub fn is_out(&self, target: QualityTarget) -> bool {
        self.out.get(&target).copied().unwrap_or(false)
    }
}
