//! Base kernels, Gram matrices and the weighted combined kernel.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `<x, z>`
    Linear,
    /// `(<x, z> + 1)^degree`
    Polynomial { degree: u32 },
    /// `exp(-||x - z||^2 / (2 sigma2))`
    Gaussian { sigma2: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Polynomial { degree } if degree >= 1 => Ok(()),
            KernelSpec::Polynomial { degree } => Err(Error::InvalidKernel(format!(
                "polynomial degree must be >= 1, got {degree}"
            ))),
            KernelSpec::Gaussian { sigma2 } if sigma2 > 0.0 && sigma2.is_finite() => Ok(()),
            KernelSpec::Gaussian { sigma2 } => Err(Error::InvalidKernel(format!(
                "gaussian sigma2 must be positive, got {sigma2}"
            ))),
        }
    }

    /// Degrees outside 1..=3 are accepted but are not part of the standard bank.
    pub fn is_default_family(&self) -> bool {
        match *self {
            KernelSpec::Polynomial { degree } => (1..=3).contains(&degree),
            _ => true,
        }
    }

    /// Evaluates the kernel without validating `self`; callers on hot paths
    /// validate once up front.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], z: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(x, z),
            KernelSpec::Polynomial { degree } => (dot(x, z) + 1.0).powi(degree as i32),
            KernelSpec::Gaussian { sigma2 } => {
                let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * sigma2)).exp()
            }
        }
    }

    /// Total order used to make kernel sums independent of bank ordering.
    fn canonical_cmp(&self, other: &Self) -> Ordering {
        fn rank(k: &KernelSpec) -> (u8, f64) {
            match *k {
                KernelSpec::Linear => (0, 0.0),
                KernelSpec::Polynomial { degree } => (1, degree as f64),
                KernelSpec::Gaussian { sigma2 } => (2, sigma2),
            }
        }
        let (ra, pa) = rank(self);
        let (rb, pb) = rank(other);
        ra.cmp(&rb).then(pa.total_cmp(&pb))
    }
}

#[inline]
fn dot(x: &[f64], z: &[f64]) -> f64 {
    x.iter().zip(z).map(|(a, b)| a * b).sum()
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], z: &[f64]) -> Result<f64> {
    spec.validate()?;
    if x.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: z.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(spec.eval_unchecked(x, z))
}

/// `G[i][j] = k(x_i, x_j)` over the rows of `rows`. Rows are filled in parallel.
pub fn gram_matrix(spec: &KernelSpec, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let n = rows.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let d = rows[0].len();
    if d == 0 {
        return Err(Error::EmptyInput);
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| spec.eval_unchecked(&rows[i], &rows[j])).collect())
        .collect();
    let mut g = DMatrix::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + off;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// Ordered list of base kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<KernelSpec>", into = "Vec<KernelSpec>")]
pub struct KernelBank {
    specs: Vec<KernelSpec>,
    order: Vec<usize>,
}

impl KernelBank {
    /// Builds a bank of distinct, valid kernels.
    pub fn new(specs: Vec<KernelSpec>) -> Result<Self> {
        for (i, a) in specs.iter().enumerate() {
            if specs[..i].contains(a) {
                return Err(Error::InvalidKernel(format!("duplicate kernel {a:?}")));
            }
        }
        Self::with_duplicates(specs)
    }

    /// Like [`KernelBank::new`] but allows repeated specs.
    pub fn with_duplicates(specs: Vec<KernelSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidKernel("kernel bank is empty".into()));
        }
        for s in &specs {
            s.validate()?;
        }
        let mut order: Vec<usize> = (0..specs.len()).collect();
        order.sort_by(|&a, &b| specs[a].canonical_cmp(&specs[b]).then(a.cmp(&b)));
        Ok(KernelBank { specs, order })
    }

    /// Linear, polynomial of degree 2 and 3, and seven Gaussians with
    /// sigma2 = 0.05, 0.10, ..., 0.35.
    pub fn standard() -> Self {
        let mut specs = vec![
            KernelSpec::Linear,
            KernelSpec::Polynomial { degree: 2 },
            KernelSpec::Polynomial { degree: 3 },
        ];
        specs.extend(
            [0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35]
                .map(|sigma2| KernelSpec::Gaussian { sigma2 }),
        );
        KernelBank::new(specs).expect("standard bank is valid")
    }

    pub fn specs(&self) -> &[KernelSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    /// Index order in which weighted sums are accumulated.
    pub(crate) fn canonical_order(&self) -> &[usize] {
        &self.order
    }

    pub fn grams(&self, rows: &[Vec<f64>]) -> Result<Vec<DMatrix<f64>>> {
        self.specs.iter().map(|s| gram_matrix(s, rows)).collect()
    }

    /// `sum_m gamma_m k_m(x, z)`, accumulated in canonical order.
    pub fn eval_combined(&self, gamma: &[f64], x: &[f64], z: &[f64]) -> f64 {
        self.order
            .iter()
            .map(|&m| gamma[m] * self.specs[m].eval_unchecked(x, z))
            .fold(0.0, |acc, v| acc + v)
    }
}

impl TryFrom<Vec<KernelSpec>> for KernelBank {
    type Error = Error;

    fn try_from(specs: Vec<KernelSpec>) -> Result<Self> {
        KernelBank::with_duplicates(specs)
    }
}

impl From<KernelBank> for Vec<KernelSpec> {
    fn from(bank: KernelBank) -> Self {
        bank.specs
    }
}

/// Non-negative kernel weights inside the unit lp ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelWeights {
    pub gamma: Vec<f64>,
    pub p: f64,
}

impl KernelWeights {
    /// `gamma_m = 1 / M`.
    pub fn uniform_init(m: usize, p: f64) -> Self {
        KernelWeights {
            gamma: vec![1.0 / m as f64; m],
            p,
        }
    }

    /// `||gamma||_p`, computed with a max-rescaling so large p does not underflow.
    pub fn lp_norm(&self) -> f64 {
        lp_norm(&self.gamma, self.p)
    }

    pub fn is_feasible(&self) -> bool {
        self.gamma.iter().all(|&g| g >= 0.0 && g.is_finite()) && self.lp_norm() <= 1.0 + 1e-9
    }
}

pub(crate) fn lp_norm(v: &[f64], p: f64) -> f64 {
    let max = v.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if max == 0.0 {
        return 0.0;
    }
    let s: f64 = v.iter().map(|&g| (g.abs() / max).powf(p)).sum();
    max * s.powf(1.0 / p)
}

/// `K = sum_m gamma_m G_m`.
pub fn combined_kernel(
    bank: &KernelBank,
    weights: &KernelWeights,
    grams: &[DMatrix<f64>],
) -> Result<DMatrix<f64>> {
    if grams.len() != bank.len() {
        return Err(Error::DimensionMismatch {
            expected: bank.len(),
            got: grams.len(),
        });
    }
    if weights.gamma.len() != bank.len() {
        return Err(Error::DimensionMismatch {
            expected: bank.len(),
            got: weights.gamma.len(),
        });
    }
    if let Some(g) = weights.gamma.iter().find(|g| !(**g >= 0.0)) {
        return Err(Error::InvalidHyperparam(format!(
            "kernel weight must be non-negative, got {g}"
        )));
    }
    let n = grams[0].nrows();
    if let Some(bad) = grams.iter().find(|g| g.nrows() != n || g.ncols() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: bad.nrows(),
        });
    }
    let mut k = DMatrix::zeros(n, n);
    for &m in bank.canonical_order() {
        let w = weights.gamma[m];
        if w != 0.0 {
            k += &grams[m] * w;
        }
    }
    Ok(k)
}
