//! Gap filling: in-epoch means for scattered gaps, least-squares regression
//! on configured correlated channels for channels missing an entire epoch.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sync::AlignedTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellSource {
    Observed,
    Mean,
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletedTable {
    pub start_ms: i64,
    pub end_ms: i64,
    pub step_ms: i64,
    pub t_ms: Vec<i64>,
    pub channels: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub sources: Vec<Vec<CellSource>>,
}

impl CompletedTable {
    pub fn rows(&self) -> usize {
        self.t_ms.len()
    }

    pub fn column(&self, channel: &str) -> Option<&[f64]> {
        self.channels
            .iter()
            .position(|c| c == channel)
            .map(|i| self.columns[i].as_slice())
    }

    /// Channels with at least one non-observed cell.
    pub fn imputed_channels(&self) -> Vec<String> {
        self.channels
            .iter()
            .zip(&self.sources)
            .filter(|(_, s)| s.iter().any(|c| *c != CellSource::Observed))
            .map(|(c, _)| c.clone())
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImputeConfig {
    /// Channel -> channels it is regressed on when missing for a whole epoch.
    pub regressors: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub target: String,
    pub regressors: Vec<String>,
    pub intercept: f64,
    pub coef: Vec<f64>,
    pub residual_sd: f64,
    pub n: usize,
}

impl LinearFit {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }
}

/// Ordinary least squares with intercept; minimum-norm solution when the
/// design is rank deficient.
pub fn fit_linear(target: &str, regressors: &[String], x: &[Vec<f64>], y: &[f64]) -> Result<LinearFit> {
    let k = regressors.len();
    let n = y.len();
    if n < k + 1 {
        return Err(Error::RegressionUnavailable {
            channel: target.into(),
            msg: format!("{n} reference rows for {} coefficients", k + 1),
        });
    }
    let design = DMatrix::from_fn(n, k + 1, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
    let svd = design.clone().svd(true, true);
    let cutoff = svd.singular_values.max() * 1e-12 * n as f64;
    let w = svd
        .solve(&DVector::from_column_slice(y), cutoff)
        .map_err(|e| Error::RegressionUnavailable {
            channel: target.into(),
            msg: e.into(),
        })?;
    let resid = DVector::from_column_slice(y) - &design * &w;
    let dof = n.saturating_sub(k + 1).max(1);
    Ok(LinearFit {
        target: target.into(),
        regressors: regressors.to_vec(),
        intercept: w[0],
        coef: w.iter().skip(1).copied().collect(),
        residual_sd: (resid.norm_squared() / dof as f64).sqrt(),
        n,
    })
}

/// Observed rows from earlier epochs, kept per regression target.
#[derive(Debug, Clone, Default)]
pub struct RegressionReference {
    cfg: ImputeConfig,
    capacity: usize,
    rows: BTreeMap<String, (Vec<Vec<f64>>, Vec<f64>)>,
}

impl RegressionReference {
    /// Keeps at most `capacity` rows per target, oldest dropped first.
    pub fn new(cfg: ImputeConfig, capacity: usize) -> Self {
        RegressionReference {
            cfg,
            capacity,
            rows: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &ImputeConfig {
        &self.cfg
    }

    pub fn rows_for(&self, target: &str) -> usize {
        self.rows.get(target).map_or(0, |r| r.1.len())
    }

    /// Adds every row where the target and all its regressors were observed.
    pub fn add(&mut self, table: &CompletedTable) {
        let idx = |c: &str| table.channels.iter().position(|x| x == c);
        for (target, regs) in &self.cfg.regressors {
            let Some(ti) = idx(target) else { continue };
            let Some(ri) = regs.iter().map(|r| idx(r)).collect::<Option<Vec<usize>>>() else {
                continue;
            };
            let entry = self.rows.entry(target.clone()).or_default();
            for row in 0..table.rows() {
                let observed = |c: usize| table.sources[c][row] == CellSource::Observed;
                if observed(ti) && ri.iter().all(|&c| observed(c)) {
                    entry.0.push(ri.iter().map(|&c| table.columns[c][row]).collect());
                    entry.1.push(table.columns[ti][row]);
                }
            }
            if entry.1.len() > self.capacity {
                let drop = entry.1.len() - self.capacity;
                entry.0.drain(..drop);
                entry.1.drain(..drop);
            }
        }
    }

    pub fn fit(&self, target: &str) -> Result<LinearFit> {
        let regs = self
            .cfg
            .regressors
            .get(target)
            .ok_or_else(|| Error::NoRegressors(target.into()))?;
        let (x, y) = self.rows.get(target).ok_or_else(|| Error::RegressionUnavailable {
            channel: target.into(),
            msg: "no reference epochs observed".into(),
        })?;
        fit_linear(target, regs, x, y)
    }
}

pub fn impute(table: &AlignedTable, reference: &RegressionReference) -> Result<CompletedTable> {
    let rows = table.rows();
    let nc = table.channels.len();
    let mut columns = vec![vec![0.0; rows]; nc];
    let mut sources = vec![vec![CellSource::Observed; rows]; nc];
    let mut fully_missing = Vec::new();
    for c in 0..nc {
        let present: Vec<f64> = table.columns[c].iter().flatten().copied().collect();
        if present.is_empty() {
            if rows > 0 {
                fully_missing.push(c);
            }
            continue;
        }
        let mean = present.iter().sum::<f64>() / present.len() as f64;
        for (r, cell) in table.columns[c].iter().enumerate() {
            match cell {
                Some(v) => columns[c][r] = *v,
                None => {
                    columns[c][r] = mean;
                    sources[c][r] = CellSource::Mean;
                }
            }
        }
    }
    if nc > 0 && fully_missing.len() == nc {
        return Err(Error::AllMissing);
    }
    let available: Vec<bool> = (0..nc).map(|c| !fully_missing.contains(&c)).collect();
    for &c in &fully_missing {
        let name = &table.channels[c];
        let regs = reference
            .config()
            .regressors
            .get(name)
            .filter(|r| !r.is_empty())
            .ok_or_else(|| Error::NoRegressors(name.clone()))?;
        let ri = regs
            .iter()
            .map(|r| match table.index_of(r) {
                Some(i) if available[i] => Ok(i),
                _ => Err(Error::RegressionUnavailable {
                    channel: name.clone(),
                    msg: format!("regressor {r} is not available in this epoch"),
                }),
            })
            .collect::<Result<Vec<usize>>>()?;
        let fit = reference.fit(name)?;
        for r in 0..rows {
            let x: Vec<f64> = ri.iter().map(|&i| columns[i][r]).collect();
            columns[c][r] = fit.eval(&x);
            sources[c][r] = CellSource::Regression;
        }
    }
    Ok(CompletedTable {
        start_ms: table.start_ms,
        end_ms: table.end_ms,
        step_ms: table.step_ms,
        t_ms: table.t_ms.clone(),
        channels: table.channels.clone(),
        columns,
        sources,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(cols: Vec<(&str, Vec<Option<f64>>)>) -> AlignedTable {
        let rows = cols[0].1.len();
        AlignedTable {
            start_ms: 0,
            end_ms: (rows as i64 - 1) * 100,
            step_ms: 100,
            t_ms: (0..rows as i64).map(|i| i * 100).collect(),
            channels: cols.iter().map(|c| c.0.to_string()).collect(),
            columns: cols.into_iter().map(|c| c.1).collect(),
        }
    }

    fn cfg(pairs: &[(&str, &[&str])]) -> ImputeConfig {
        ImputeConfig {
            regressors: pairs
                .iter()
                .map(|(t, r)| (t.to_string(), r.iter().map(|s| s.to_string()).collect()))
                .collect(),
        }
    }

    #[test]
    fn complete_table_is_unchanged() {
        let t = table(vec![("a", vec![Some(1.0), Some(2.0)]), ("b", vec![Some(3.0), Some(4.0)])]);
        let c = impute(&t, &RegressionReference::default()).unwrap();
        assert_eq!(c.columns, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert!(c.imputed_channels().is_empty());
    }

    #[test]
    fn scattered_gap_gets_mean() {
        let t = table(vec![("a", vec![Some(5.0), None, Some(5.0)]), ("b", vec![Some(1.0), Some(2.0), None])]);
        let c = impute(&t, &RegressionReference::default()).unwrap();
        assert_eq!(c.columns[0], vec![5.0, 5.0, 5.0]);
        assert_eq!(c.columns[1], vec![1.0, 2.0, 1.5]);
        assert_eq!(c.sources[0][1], CellSource::Mean);
        assert_eq!(c.sources[1][0], CellSource::Observed);
    }

    #[test]
    fn fully_missing_needs_regressors() {
        let t = table(vec![("a", vec![Some(1.0), Some(2.0)]), ("b", vec![None, None])]);
        match impute(&t, &RegressionReference::default()) {
            Err(Error::NoRegressors(ch)) => assert_eq!(ch, "b"),
            other => panic!("{other:?}"),
        }
        let t = table(vec![("a", vec![None, None])]);
        assert!(matches!(impute(&t, &RegressionReference::default()), Err(Error::AllMissing)));
    }

    #[test]
    fn regression_recovers_exact_coupling() {
        let cfg = cfg(&[("o", &["f"])]);
        let mut reference = RegressionReference::new(cfg, 10_000);
        let f: Vec<f64> = (0..50).map(|i| 10.0 + (i as f64 * 0.3).sin()).collect();
        let full = table(vec![
            ("f", f.iter().map(|&v| Some(v)).collect()),
            ("o", f.iter().map(|&v| Some(4.8 * v + 1.0)).collect()),
        ]);
        reference.add(&impute(&full, &RegressionReference::default()).unwrap());
        assert_eq!(reference.rows_for("o"), 50);
        let gap = table(vec![("f", vec![Some(11.0), None, Some(9.0)]), ("o", vec![None; 3])]);
        let c = impute(&gap, &reference).unwrap();
        for (r, expect) in [4.8 * 11.0 + 1.0, 4.8 * 10.0 + 1.0, 4.8 * 9.0 + 1.0].iter().enumerate() {
            assert!((c.columns[1][r] - expect).abs() < 1e-9);
        }
        assert!(c.sources[1].iter().all(|s| *s == CellSource::Regression));
        assert_eq!(c.columns[0], vec![11.0, 10.0, 9.0]);
    }

    #[test]
    fn regression_without_reference_names_channel() {
        let reference = RegressionReference::new(cfg(&[("o", &["f"])]), 10);
        let t = table(vec![("f", vec![Some(1.0), Some(2.0)]), ("o", vec![None, None])]);
        match impute(&t, &reference) {
            Err(Error::RegressionUnavailable { channel, .. }) => assert_eq!(channel, "o"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reference_capacity_drops_oldest() {
        let mut reference = RegressionReference::new(cfg(&[("o", &["f"])]), 3);
        let t = table(vec![
            ("f", (0..5).map(|i| Some(i as f64)).collect()),
            ("o", (0..5).map(|i| Some(2.0 * i as f64)).collect()),
        ]);
        reference.add(&impute(&t, &RegressionReference::default()).unwrap());
        assert_eq!(reference.rows_for("o"), 3);
        let fit = reference.fit("o").unwrap();
        assert!((fit.coef[0] - 2.0).abs() < 1e-12 && fit.intercept.abs() < 1e-9);
    }
}
