//! Alignment of stored series onto a common zero-order-hold time grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::StoredSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedTable {
    pub start_ms: i64,
    pub end_ms: i64,
    pub step_ms: i64,
    pub t_ms: Vec<i64>,
    pub channels: Vec<String>,
    /// `columns[c][row]`; `None` where the channel had no value at that instant.
    pub columns: Vec<Vec<Option<f64>>>,
}

impl AlignedTable {
    pub fn rows(&self) -> usize {
        self.t_ms.len()
    }

    pub fn index_of(&self, channel: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == channel)
    }

    pub fn column(&self, channel: &str) -> Option<&[Option<f64>]> {
        self.index_of(channel).map(|i| self.columns[i].as_slice())
    }

    /// Per-row flag: every channel has a value.
    pub fn complete_rows(&self) -> Vec<bool> {
        (0..self.rows())
            .map(|r| self.columns.iter().all(|c| c[r].is_some()))
            .collect()
    }

    pub fn fully_missing(&self) -> Vec<&str> {
        self.channels
            .iter()
            .zip(&self.columns)
            .filter(|(_, col)| col.iter().all(Option::is_none))
            .map(|(c, _)| c.as_str())
            .collect()
    }
}

/// Grid instants `start, start + step, ...` up to and including `end`.
/// An epoch with `end <= start` yields an empty table.
pub fn synchronize(series: &[StoredSeries], start_ms: i64, end_ms: i64, step_ms: i64) -> Result<AlignedTable> {
    if step_ms <= 0 {
        return Err(Error::Config(format!("grid step must be positive, got {step_ms}")));
    }
    let t_ms: Vec<i64> = if end_ms <= start_ms {
        Vec::new()
    } else {
        (0..=(end_ms - start_ms) / step_ms).map(|k| start_ms + k * step_ms).collect()
    };
    let columns = series
        .iter()
        .map(|s| {
            t_ms.iter()
                .map(|&t| s.reconstruct(t).ok().flatten())
                .collect()
        })
        .collect();
    Ok(AlignedTable {
        start_ms,
        end_ms,
        step_ms,
        t_ms,
        channels: series.iter().map(|s| s.channel.clone()).collect(),
        columns,
    })
}
