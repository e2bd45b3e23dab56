//! Metrics, leave-one-out grid search over `(C, p)`, and the least-squares
//! baseline.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kernels::KernelBank;
use crate::semkl::{self, Hyperparams};
use crate::standardize::Standardizer;

pub fn rmsd(y: &[f64], f: &[f64]) -> Result<f64> {
    check_pair(y, f)?;
    let s: f64 = y.iter().zip(f).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((s / y.len() as f64).sqrt())
}

/// `sum_i max(0, |y_i - f_i| - eps)`.
pub fn eps_error(y: &[f64], f: &[f64], epsilon: f64) -> Result<f64> {
    check_pair(y, f)?;
    Ok(y.iter()
        .zip(f)
        .map(|(a, b)| ((a - b).abs() - epsilon).max(0.0))
        .sum())
}

fn check_pair(y: &[f64], f: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::EmptyInput);
    }
    if y.len() != f.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: f.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub c_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub epsilon: f64,
}

impl Default for GridSpec {
    /// `C = 10^0 .. 10^5`, `p = 2^0 .. 2^15`, `eps = 0.1`.
    fn default() -> Self {
        GridSpec {
            c_values: (0..=5).map(|e| 10f64.powi(e)).collect(),
            p_values: (0..=15).map(|e| 2f64.powi(e)).collect(),
            epsilon: 0.1,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.c_values.is_empty() || self.p_values.is_empty() {
            return Err(Error::InvalidHyperparam("grid axes must be non-empty".into()));
        }
        let sorted = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if !sorted(&self.c_values) || !sorted(&self.p_values) {
            return Err(Error::InvalidHyperparam(
                "grid values must be strictly ascending".into(),
            ));
        }
        if self.c_values.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::InvalidHyperparam("C values must be positive".into()));
        }
        if self.p_values.iter().any(|&p| !(p >= 1.0)) {
            return Err(Error::InvalidHyperparam("p values must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestCell {
    pub p_index: usize,
    pub c_index: usize,
    pub p: f64,
    pub c: f64,
    pub rmsd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub grid: GridSpec,
    /// `rmsd[p_index][c_index]`; `None` marks a cell where some fold failed.
    pub rmsd: Vec<Vec<Option<f64>>>,
    /// Held-out predictions `[p_index][c_index][sample]`.
    pub predictions: Vec<Vec<Vec<f64>>>,
    /// First failure per invalid cell.
    pub failures: Vec<(usize, usize, String)>,
    pub best: Option<BestCell>,
}

impl CvReport {
    /// Minimum over `C` for each `p`.
    pub fn p_curve(&self) -> Vec<Option<f64>> {
        self.rmsd
            .iter()
            .map(|row| row.iter().flatten().copied().reduce(f64::min))
            .collect()
    }

    /// Rows are `p`, columns are `C`. The best cell carries a trailing `*`;
    /// invalid cells are written as `NaN`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p");
        for c in &self.grid.c_values {
            let _ = write!(out, ",C={c}");
        }
        out.push('\n');
        for (pi, row) in self.rmsd.iter().enumerate() {
            let _ = write!(out, "{}", self.grid.p_values[pi]);
            for (ci, cell) in row.iter().enumerate() {
                let mark = match self.best {
                    Some(b) if b.p_index == pi && b.c_index == ci => "*",
                    _ => "",
                };
                match cell {
                    Some(v) => {
                        let _ = write!(out, ",{v:.6}{mark}");
                    }
                    None => out.push_str(",NaN"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Leave-one-out CV for every `(p, C)` cell. Folds refit standardization on
/// their own training rows. Cells and folds run in parallel; results are
/// assembled by index so the report does not depend on scheduling.
pub fn loo_cv(
    dataset: &Dataset,
    bank: &KernelBank,
    grid: &GridSpec,
    base: &Hyperparams,
) -> Result<CvReport> {
    grid.validate()?;
    let n = dataset.len();
    if n < 3 {
        return Err(Error::InvalidHyperparam(format!(
            "leave-one-out needs at least 3 samples, got {n}"
        )));
    }
    dataset.check_finite()?;
    let np = grid.p_values.len();
    let nc = grid.c_values.len();
    let jobs: Vec<(usize, usize, usize)> = (0..np)
        .flat_map(|pi| (0..nc).flat_map(move |ci| (0..n).map(move |k| (pi, ci, k))))
        .collect();
    let results: Vec<std::result::Result<f64, String>> = jobs
        .par_iter()
        .map(|&(pi, ci, k)| {
            let hp = Hyperparams {
                c: grid.c_values[ci],
                p: grid.p_values[pi],
                epsilon: grid.epsilon,
                ..*base
            };
            let (train, x_out, _) = dataset.leave_out(k);
            semkl::train(&train, bank, &hp)
                .and_then(|m| m.predict(&x_out))
                .map_err(|e| format!("fold {k}: {e}"))
        })
        .collect();

    let mut rmsd_m = vec![vec![None; nc]; np];
    let mut preds = vec![vec![vec![f64::NAN; n]; nc]; np];
    let mut failures = Vec::new();
    for (cell, chunk) in results.chunks(n).enumerate() {
        let (pi, ci) = (cell / nc, cell % nc);
        let mut ok = true;
        for (k, r) in chunk.iter().enumerate() {
            match r {
                Ok(v) => preds[pi][ci][k] = *v,
                Err(msg) => {
                    if ok {
                        failures.push((pi, ci, msg.clone()));
                    }
                    ok = false;
                }
            }
        }
        if ok {
            rmsd_m[pi][ci] = Some(rmsd(&dataset.y, &preds[pi][ci])?);
        }
    }
    let best = select_best(&rmsd_m, grid);
    Ok(CvReport {
        grid: grid.clone(),
        rmsd: rmsd_m,
        predictions: preds,
        failures,
        best,
    })
}

/// Minimum RMSD; ties go to the smaller `C`, then the smaller `p`.
fn select_best(m: &[Vec<Option<f64>>], grid: &GridSpec) -> Option<BestCell> {
    let mut best: Option<BestCell> = None;
    for ci in 0..grid.c_values.len() {
        for (pi, row) in m.iter().enumerate() {
            let Some(v) = row[ci] else { continue };
            if !v.is_finite() {
                continue;
            }
            if best.is_none_or(|b| v < b.rmsd) {
                best = Some(BestCell {
                    p_index: pi,
                    c_index: ci,
                    p: grid.p_values[pi],
                    c: grid.c_values[ci],
                    rmsd: v,
                });
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub standardizer: Standardizer,
    pub intercept: f64,
    pub coef: Vec<f64>,
    pub rank_deficient: bool,
}

impl LinearModel {
    /// Ordinary least squares with intercept on z-scored features; the
    /// minimum-norm solution is taken when the design is rank deficient.
    pub fn fit(train: &Dataset) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyInput);
        }
        train.check_finite()?;
        let standardizer = Standardizer::fit(&train.x)?;
        let z = standardizer.transform_all(&train.x)?;
        let n = train.len();
        let d = standardizer.output_dim();
        let design = DMatrix::from_fn(n, d + 1, |i, j| if j == 0 { 1.0 } else { z[i][j - 1] });
        let y = DVector::from_column_slice(&train.y);
        let svd = design.svd(true, true);
        let smax = svd.singular_values.max();
        let cutoff = smax * 1e-12 * (n.max(d + 1) as f64);
        let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
        let rank_deficient = rank < d + 1;
        if rank_deficient {
            log::warn!(
                "least-squares design has rank {rank} < {}; using the minimum-norm solution",
                d + 1
            );
        }
        let w = svd
            .solve(&y, cutoff)
            .map_err(|e| Error::InvalidHyperparam(format!("least squares: {e}")))?;
        Ok(LinearModel {
            standardizer,
            intercept: w[0],
            coef: w.iter().skip(1).copied().collect(),
            rank_deficient,
        })
    }

    pub fn predict(&self, x_raw: &[f64]) -> Result<f64> {
        let z = self.standardizer.transform(x_raw)?;
        Ok(self.intercept + z.iter().zip(&self.coef).map(|(a, b)| a * b).sum::<f64>())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmsd: f64,
    pub eps_error: f64,
}

/// Least-squares fit on `train`, RMSD and epsilon-error on `test`.
pub fn linear_baseline(train: &Dataset, test: &Dataset, epsilon: f64) -> Result<Metrics> {
    let model = LinearModel::fit(train)?;
    let f: Vec<f64> = test
        .x
        .iter()
        .map(|r| model.predict(r))
        .collect::<Result<_>>()?;
    Ok(Metrics {
        rmsd: rmsd(&test.y, &f)?,
        eps_error: eps_error(&test.y, &f, epsilon)?,
    })
}
