//! Deadband-stored series and their zero-order-hold reconstruction.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoredPoint {
    pub t_ms: i64,
    /// `None` marks the start of a gap in the source signal.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredSeries {
    pub channel: String,
    pub epoch_start_ms: i64,
    pub epoch_end_ms: i64,
    /// Non-decreasing in `t_ms`.
    pub points: Vec<StoredPoint>,
}

impl StoredSeries {
    pub fn new(channel: impl Into<String>, epoch_start_ms: i64, epoch_end_ms: i64) -> Self {
        StoredSeries {
            channel: channel.into(),
            epoch_start_ms,
            epoch_end_ms,
            points: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Value of the latest stored point at or before `t_ms`; `Ok(None)` inside a gap.
    pub fn reconstruct(&self, t_ms: i64) -> Result<Option<f64>> {
        let idx = self.points.partition_point(|p| p.t_ms <= t_ms);
        if idx == 0 {
            return Err(Error::BeforeFirstPoint {
                channel: self.channel.clone(),
                t_ms,
            });
        }
        Ok(self.points[idx - 1].value)
    }

    /// Present (t, value) pairs, gaps skipped.
    pub fn good_points(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.points.iter().filter_map(|p| p.value.map(|v| (p.t_ms, v)))
    }

    /// `t_ms,value` with an empty value field for gap markers.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_ms,value\n");
        for p in &self.points {
            match p.value {
                Some(v) => {
                    let _ = writeln!(out, "{},{}", p.t_ms, v);
                }
                None => {
                    let _ = writeln!(out, "{},", p.t_ms);
                }
            }
        }
        out
    }
}
