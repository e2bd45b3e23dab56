use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Labeled feature rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, x: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        let d = feature_names.len();
        if let Some(bad) = x.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bad.len(),
            });
        }
        Ok(Dataset { feature_names, x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    /// Errors on the first non-finite feature or label.
    pub fn check_finite(&self) -> Result<()> {
        for (row, r) in self.x.iter().enumerate() {
            if let Some(j) = r.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    feature: self.feature_names[j].clone(),
                    row,
                });
            }
        }
        if let Some(row) = self.y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                feature: "label".into(),
                row,
            });
        }
        Ok(())
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            x: idx.iter().map(|&i| self.x[i].clone()).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
        }
    }

    /// Dataset with row `i` removed, plus that row.
    pub fn leave_out(&self, i: usize) -> (Dataset, Vec<f64>, f64) {
        let idx: Vec<usize> = (0..self.len()).filter(|&k| k != i).collect();
        (self.subset(&idx), self.x[i].clone(), self.y[i])
    }
}
