//! lp-norm SEMKL regression: alternating SVR solves and closed-form kernel
//! weight updates.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kernels::{combined_kernel, KernelBank, KernelWeights};
use crate::standardize::Standardizer;
use crate::svr::{solve_svr, SmoOptions, SvrProblem, SvrSolution};
use crate::target::QualityTarget;

pub const MODEL_MAGIC: &str = "sprayq-semkl-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub c: f64,
    pub p: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    /// Relative change of the regularized objective that counts as converged.
    pub gap_tol: f64,
    pub smo: SmoOptions,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            c: 1.0,
            p: 1.0,
            epsilon: 0.1,
            max_iters: 100,
            gap_tol: 1e-4,
            smo: SmoOptions {
                tol: 1e-9,
                ..SmoOptions::default()
            },
        }
    }
}

impl Hyperparams {
    pub fn new(c: f64, p: f64) -> Self {
        Hyperparams {
            c,
            p,
            ..Hyperparams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::InvalidHyperparam(format!("C must be positive, got {}", self.c)));
        }
        if !(self.p >= 1.0) || !self.p.is_finite() {
            return Err(Error::InvalidHyperparam(format!("p must be >= 1, got {}", self.p)));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidHyperparam(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidHyperparam("max_iters must be positive".into()));
        }
        if !(self.gap_tol > 0.0) {
            return Err(Error::InvalidHyperparam(format!(
                "gap_tol must be positive, got {}",
                self.gap_tol
            )));
        }
        Ok(())
    }
}

/// `||f_m||_{H_m} = gamma_m sqrt(beta' G_m beta)`.
pub fn norm_in_hm(gram: &DMatrix<f64>, gamma_m: f64, beta: &[f64]) -> Result<f64> {
    let q = quadratic_form(gram, beta)?;
    Ok(gamma_m * q.sqrt())
}

/// `beta' G beta`, with round-off negatives above `-1e-10` clamped to zero.
fn quadratic_form(gram: &DMatrix<f64>, beta: &[f64]) -> Result<f64> {
    let n = beta.len();
    if gram.nrows() != n || gram.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: gram.nrows(),
        });
    }
    let mut q = 0.0;
    for i in 0..n {
        if beta[i] == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for j in 0..n {
            row += gram[(i, j)] * beta[j];
        }
        q += beta[i] * row;
    }
    if q < -1e-10 {
        return Err(Error::NotPsd(q));
    }
    Ok(q.max(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightUpdate {
    pub weights: KernelWeights,
    /// Every component norm was zero; uniform weights were substituted.
    pub degenerate: bool,
}

/// Closed-form minimizer of `sum_m ||f_m||^2 / gamma_m` over the unit lp ball:
///
/// `gamma_m = n_m^(2/(1+p)) / (sum_k n_k^(2p/(1+p)))^(1/p)`
///
/// evaluated in log space so that very large `p` stays finite.
pub fn update_weights(norms: &[f64], p: f64) -> Result<WeightUpdate> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidHyperparam(format!("p must be >= 1, got {p}")));
    }
    if norms.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(bad) = norms.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidHyperparam(format!(
            "component norm must be finite and >= 0, got {bad}"
        )));
    }
    let m = norms.len();
    if norms.iter().all(|&v| v == 0.0) {
        return Ok(WeightUpdate {
            weights: KernelWeights {
                gamma: vec![(m as f64).powf(-1.0 / p); m],
                p,
            },
            degenerate: true,
        });
    }
    let e_num = 2.0 / (1.0 + p);
    let e_den = 2.0 * p / (1.0 + p);
    // summation in sorted order keeps the result independent of kernel order
    let mut terms: Vec<f64> = norms
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|v| e_den * v.ln())
        .collect();
    terms.sort_by(f64::total_cmp);
    let top = *terms.last().expect("at least one positive norm");
    let lse = top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln();
    let gamma = norms
        .iter()
        .map(|&v| {
            if v > 0.0 {
                (e_num * v.ln() - lse / p).exp()
            } else {
                0.0
            }
        })
        .collect();
    Ok(WeightUpdate {
        weights: KernelWeights { gamma, p },
        degenerate: false,
    })
}

/// One alternation of the training loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub gamma: Vec<f64>,
    /// `1/2 sum_m ||f_m||^2 / gamma_m + C sum loss_eps` at this iterate.
    pub objective: f64,
    pub dual_objective: f64,
    /// Primal minus dual at the current weights.
    pub gap: f64,
    pub smo_iterations: usize,
    pub smo_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemklModel {
    pub target: Option<QualityTarget>,
    /// Raw input schema, before constant columns are dropped.
    pub feature_names: Vec<String>,
    pub bank: KernelBank,
    pub weights: KernelWeights,
    pub alpha: Vec<f64>,
    pub alpha_star: Vec<f64>,
    pub b: f64,
    /// Standardized training inputs.
    pub x_train: Vec<Vec<f64>>,
    pub standardizer: Standardizer,
    pub hyperparams: Hyperparams,
    pub converged: bool,
    pub iters: usize,
    pub degenerate_weights: bool,
    pub history: Vec<IterationRecord>,
}

/// Regularized objective at fixed weights: `1/2 sum_m gamma_m beta' G_m beta`
/// plus the epsilon-insensitive training loss. `gamma_m = 0` contributes 0.
fn regularized_objective(
    grams: &[DMatrix<f64>],
    kernel: &DMatrix<f64>,
    gamma: &[f64],
    y: &[f64],
    sol: &SvrSolution,
    hp: &Hyperparams,
) -> Result<f64> {
    let beta = sol.beta();
    let mut reg = 0.0;
    for (g, &w) in grams.iter().zip(gamma) {
        if w > 0.0 {
            reg += w * quadratic_form(g, &beta)?;
        }
    }
    let n = y.len();
    let mut loss = 0.0;
    for i in 0..n {
        let mut f = sol.b;
        for j in 0..n {
            f += kernel[(i, j)] * beta[j];
        }
        loss += ((f - y[i]).abs() - hp.epsilon).max(0.0);
    }
    Ok(0.5 * reg + hp.c * loss)
}

pub fn train(dataset: &Dataset, bank: &KernelBank, hp: &Hyperparams) -> Result<SemklModel> {
    hp.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyInput);
    }
    dataset.check_finite()?;
    let standardizer = Standardizer::fit(&dataset.x)?;
    let xs = if standardizer.output_dim() == 0 {
        // every feature constant: kernels see a single zero coordinate
        vec![vec![0.0]; dataset.len()]
    } else {
        standardizer.transform_all(&dataset.x)?
    };
    let grams = bank.grams(&xs)?;
    let m = bank.len();
    let n = dataset.len();

    let mut weights = KernelWeights::uniform_init(m, hp.p);
    let mut warm: Option<SvrSolution> = None;
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut converged = false;
    let mut degenerate = false;
    let mut sol = SvrSolution::zeros(n, 0.0);

    for iter in 0..hp.max_iters {
        let fail = |e: Error| Error::TrainingFailed {
            iter,
            source: Box::new(e),
        };
        let kernel = combined_kernel(bank, &weights, &grams).map_err(fail)?;
        let problem = SvrProblem::new(&kernel, &dataset.y, hp.c, hp.epsilon).map_err(fail)?;
        sol = solve_svr(
            &problem,
            &hp.smo,
            warm.as_ref().map(|w| (w.alpha.as_slice(), w.alpha_star.as_slice())),
        )
        .map_err(fail)?;
        let objective =
            regularized_objective(&grams, &kernel, &weights.gamma, &dataset.y, &sol, hp).map_err(fail)?;
        history.push(IterationRecord {
            gamma: weights.gamma.clone(),
            objective,
            dual_objective: sol.dual_objective,
            gap: objective - sol.dual_objective,
            smo_iterations: sol.iterations,
            smo_converged: sol.converged,
        });
        if let [.., prev, last] = history.as_slice() {
            let denom = prev.objective.abs().max(1e-12);
            if (last.objective - prev.objective).abs() / denom < hp.gap_tol {
                converged = true;
                break;
            }
        }
        if iter + 1 == hp.max_iters {
            break;
        }
        let beta = sol.beta();
        let norms = grams
            .iter()
            .zip(&weights.gamma)
            .map(|(g, &w)| norm_in_hm(g, w, &beta))
            .collect::<Result<Vec<f64>>>()
            .map_err(fail)?;
        let update = update_weights(&norms, hp.p).map_err(fail)?;
        degenerate = update.degenerate;
        weights = update.weights;
        warm = Some(sol.clone());
    }
    if !sol.converged {
        log::warn!(
            "SMO stopped at KKT gap {:.3e} (tol {:.1e}) in the final iteration",
            sol.kkt_gap,
            hp.smo.tol
        );
    }

    Ok(SemklModel {
        target: None,
        feature_names: dataset.feature_names.clone(),
        bank: bank.clone(),
        weights,
        alpha: sol.alpha,
        alpha_star: sol.alpha_star,
        b: sol.b,
        x_train: xs,
        standardizer,
        hyperparams: *hp,
        converged,
        iters: history.len(),
        degenerate_weights: degenerate,
        history,
    })
}

impl SemklModel {
    pub fn with_target(mut self, target: QualityTarget) -> Self {
        self.target = Some(target);
        self
    }

    pub fn beta(&self) -> Vec<f64> {
        self.alpha
            .iter()
            .zip(&self.alpha_star)
            .map(|(a, s)| a - s)
            .collect()
    }

    fn standardize(&self, x_raw: &[f64]) -> Result<Vec<f64>> {
        if x_raw.len() != self.standardizer.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.standardizer.input_dim,
                got: x_raw.len(),
            });
        }
        if let Some(j) = x_raw.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                feature: self
                    .feature_names
                    .get(j)
                    .cloned()
                    .unwrap_or_else(|| format!("#{j}")),
                row: 0,
            });
        }
        if self.standardizer.output_dim() == 0 {
            return Ok(vec![0.0]);
        }
        self.standardizer.transform(x_raw)
    }

    pub fn predict(&self, x_raw: &[f64]) -> Result<f64> {
        let xs = self.standardize(x_raw)?;
        let gamma = &self.weights.gamma;
        let mut f = 0.0;
        for ((a, s), xn) in self.alpha.iter().zip(&self.alpha_star).zip(&self.x_train) {
            let beta = a - s;
            if beta != 0.0 {
                f += beta * self.bank.eval_combined(gamma, &xs, xn);
            }
        }
        Ok(f + self.b)
    }

    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.predict(r)).collect()
    }

    /// Training objective of the final iterate.
    pub fn objective(&self) -> Option<f64> {
        self.history.last().map(|h| h.objective)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    magic: String,
    format_version: u32,
    model: SemklModel,
}

#[derive(Deserialize)]
struct ModelHeader {
    magic: String,
    format_version: u32,
}

pub fn save_model(model: &SemklModel, path: impl AsRef<Path>) -> Result<()> {
    let file = ModelFile {
        magic: MODEL_MAGIC.into(),
        format_version: MODEL_FORMAT_VERSION,
        model: model.clone(),
    };
    let text = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::ModelFormat(format!("serialize: {e}")))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SemklModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let header: ModelHeader = serde_json::from_str(&text)
        .map_err(|e| Error::ModelFormat(format!("{}: not a model file ({e})", path.display())))?;
    if header.magic != MODEL_MAGIC {
        return Err(Error::ModelFormat(format!(
            "{}: bad magic `{}`, expected `{MODEL_MAGIC}`",
            path.display(),
            header.magic
        )));
    }
    if header.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "{}: format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
            path.display(),
            header.format_version
        )));
    }
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|e| Error::ModelFormat(format!("{}: corrupt model ({e})", path.display())))?;
    Ok(file.model)
}
