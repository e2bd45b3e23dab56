//! Per-feature z-scoring with constant-column removal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    /// Width of the raw input vector.
    pub input_dim: usize,
    /// Raw column indices that survive, in order.
    pub kept: Vec<usize>,
    /// Raw column indices dropped because they were constant on the fit data.
    pub dropped: Vec<usize>,
    /// `(mean, stddev)` per kept column; stddev > 0.
    pub params: Vec<(f64, f64)>,
}

impl Standardizer {
    /// Fits means and population standard deviations on `rows`.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        let d = rows[0].len();
        let mut kept = Vec::new();
        let mut dropped = Vec::new();
        let mut params = Vec::new();
        for j in 0..d {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
            let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n as f64;
            let sd = var.sqrt();
            if sd > 1e-12 * mean.abs().max(1.0) {
                kept.push(j);
                params.push((mean, sd));
            } else {
                dropped.push(j);
            }
        }
        Ok(Standardizer {
            input_dim: d,
            kept,
            dropped,
            params,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.kept.len()
    }

    pub fn transform(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: raw.len(),
            });
        }
        Ok(self
            .kept
            .iter()
            .zip(&self.params)
            .map(|(&j, &(m, s))| (raw[j] - m) / s)
            .collect())
    }

    pub fn transform_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.transform(r)).collect()
    }
}
