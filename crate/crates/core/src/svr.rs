//! Epsilon-insensitive support vector regression over a precomputed kernel.
//!
//! The dual is solved with sequential minimal optimization in the doubled
//! variable form used by LIBSVM: `a = (alpha, alpha_star)` with signs
//! `s = (+1, ..., -1, ...)`, minimizing
//!
//! ```text
//! F(a) = 1/2 a' Q a + p' a,   Q_tu = s_t s_u K(t mod N, u mod N),
//! p = (eps - y, eps + y),     s' a = 0,   0 <= a <= C.
//! ```
//!
//! `-F(a)` is the SVR dual objective
//! `sum (alpha - alpha*) y - eps sum (alpha + alpha*) - 1/2 beta' K beta`
//! with `beta = alpha - alpha*`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

/// One fixed-kernel SVR dual.
#[derive(Debug, Clone, Copy)]
pub struct SvrProblem<'a> {
    pub kernel: &'a DMatrix<f64>,
    pub y: &'a [f64],
    pub c: f64,
    pub epsilon: f64,
}

impl<'a> SvrProblem<'a> {
    pub fn new(kernel: &'a DMatrix<f64>, y: &'a [f64], c: f64, epsilon: f64) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        if kernel.nrows() != n || kernel.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: kernel.nrows(),
            });
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidHyperparam(format!("C must be positive, got {c}")));
        }
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidHyperparam(format!(
                "epsilon must be non-negative, got {epsilon}"
            )));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (kernel[(i, j)], kernel[(j, i)]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::NotSymmetric(i, j));
                }
            }
        }
        Ok(SvrProblem {
            kernel,
            y,
            c,
            epsilon,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairSelection {
    /// Maximal violating pair (first-order).
    MaximalViolation,
    /// Maximal violator for `i`, second-order gain for `j`.
    SecondOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoOptions {
    /// Stop when the maximal KKT violation `m(a) - M(a)` drops below this.
    pub tol: f64,
    /// Sweep budget; one sweep is `2N` pair updates. `None` means `10 N`.
    pub max_passes: Option<usize>,
    pub selection: PairSelection,
    /// Periodically jump to the minimizer over the current face (free
    /// variables with the bounded ones held fixed) when that stays feasible.
    #[serde(default = "default_polish")]
    pub polish: bool,
}

fn default_polish() -> bool {
    true
}

impl Default for SmoOptions {
    fn default() -> Self {
        SmoOptions {
            tol: 1e-3,
            max_passes: None,
            selection: PairSelection::MaximalViolation,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrSolution {
    pub alpha: Vec<f64>,
    pub alpha_star: Vec<f64>,
    pub b: f64,
    pub dual_objective: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Final maximal KKT violation.
    pub kkt_gap: f64,
}

impl SvrSolution {
    /// All-zero coefficients with bias `b`.
    pub fn zeros(n: usize, b: f64) -> Self {
        SvrSolution {
            alpha: vec![0.0; n],
            alpha_star: vec![0.0; n],
            b,
            dual_objective: 0.0,
            converged: true,
            iterations: 0,
            kkt_gap: 0.0,
        }
    }

    /// `alpha - alpha_star`.
    pub fn beta(&self) -> Vec<f64> {
        self.alpha
            .iter()
            .zip(&self.alpha_star)
            .map(|(a, s)| a - s)
            .collect()
    }

    /// `sum_n beta_n k_row[n] + b`.
    pub fn decision_function(&self, k_row: &[f64]) -> Result<f64> {
        decision_function(self, k_row)
    }
}

pub fn decision_function(sol: &SvrSolution, k_row: &[f64]) -> Result<f64> {
    if k_row.len() != sol.alpha.len() {
        return Err(Error::DimensionMismatch {
            expected: sol.alpha.len(),
            got: k_row.len(),
        });
    }
    let s: f64 = sol
        .alpha
        .iter()
        .zip(&sol.alpha_star)
        .zip(k_row)
        .map(|((a, s), k)| (a - s) * k)
        .sum();
    Ok(s + sol.b)
}

/// SVR dual objective at `(alpha, alpha_star)`.
///
/// The epsilon term multiplies `alpha + alpha_star`; with `alpha - alpha_star`
/// it would cancel against the equality constraint.
pub fn dual_objective(problem: &SvrProblem<'_>, alpha: &[f64], alpha_star: &[f64]) -> f64 {
    let n = problem.len();
    let beta: Vec<f64> = alpha.iter().zip(alpha_star).map(|(a, s)| a - s).collect();
    let lin: f64 = beta.iter().zip(problem.y).map(|(b, y)| b * y).sum();
    let tube: f64 = alpha.iter().zip(alpha_star).map(|(a, s)| a + s).sum();
    let mut quad = 0.0;
    for i in 0..n {
        if beta[i] == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for j in 0..n {
            row += problem.kernel[(i, j)] * beta[j];
        }
        quad += beta[i] * row;
    }
    lin - problem.epsilon * tube - 0.5 * quad
}

struct Smo<'p, 'a> {
    prob: &'p SvrProblem<'a>,
    n: usize,
    c: f64,
    a: Vec<f64>,
    grad: Vec<f64>,
}

impl<'p, 'a> Smo<'p, 'a> {
    #[inline]
    fn sign(&self, t: usize) -> f64 {
        if t < self.n {
            1.0
        } else {
            -1.0
        }
    }

    #[inline]
    fn q(&self, t: usize, u: usize) -> f64 {
        self.sign(t) * self.sign(u) * self.prob.kernel[(t % self.n, u % self.n)]
    }

    #[inline]
    fn in_up(&self, t: usize) -> bool {
        if t < self.n {
            self.a[t] < self.c
        } else {
            self.a[t] > 0.0
        }
    }

    #[inline]
    fn in_low(&self, t: usize) -> bool {
        if t < self.n {
            self.a[t] > 0.0
        } else {
            self.a[t] < self.c
        }
    }

    fn linear_term(&self, t: usize) -> f64 {
        let y = self.prob.y[t % self.n];
        if t < self.n {
            self.prob.epsilon - y
        } else {
            self.prob.epsilon + y
        }
    }

    fn init_gradient(&mut self) {
        let m = 2 * self.n;
        for t in 0..m {
            let mut g = self.linear_term(t);
            for u in 0..m {
                if self.a[u] != 0.0 {
                    g += self.q(t, u) * self.a[u];
                }
            }
            self.grad[t] = g;
        }
    }

    /// Returns `(i, j, gap)`; `None` when no admissible pair exists.
    fn select(&self, selection: PairSelection) -> Option<(usize, usize, f64)> {
        let m = 2 * self.n;
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..m {
            if self.in_up(t) {
                let v = -self.sign(t) * self.grad[t];
                if v > gmax {
                    gmax = v;
                    i = t;
                }
            }
        }
        if i == usize::MAX {
            return None;
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..m {
            if !self.in_low(t) {
                continue;
            }
            let v = self.sign(t) * self.grad[t];
            if v > gmax2 {
                gmax2 = v;
                if selection == PairSelection::MaximalViolation {
                    j = t;
                }
            }
            if selection == PairSelection::SecondOrder {
                let diff = gmax + v;
                if diff > 0.0 {
                    let mut quad = self.q(i, i) + self.q(t, t) - 2.0 * self.sign(i) * self.sign(t) * self.q(i, t);
                    if quad <= 0.0 {
                        quad = TAU;
                    }
                    let gain = -diff * diff / quad;
                    if gain <= best {
                        best = gain;
                        j = t;
                    }
                }
            }
        }
        if j == usize::MAX {
            return Some((i, i, gmax + gmax2));
        }
        Some((i, j, gmax + gmax2))
    }

    fn update_pair(&mut self, i: usize, j: usize) {
        let c = self.c;
        let (old_i, old_j) = (self.a[i], self.a[j]);
        let qij = self.q(i, j);
        let (qii, qjj) = (self.q(i, i), self.q(j, j));
        let (mut ai, mut aj) = (old_i, old_j);
        if self.sign(i) != self.sign(j) {
            let mut quad = qii + qjj + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let mut quad = qii + qjj - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        let (di, dj) = (ai - old_i, aj - old_j);
        if cfg!(debug_assertions) {
            // F must not increase along an SMO step.
            let df = self.grad[i] * di
                + self.grad[j] * dj
                + 0.5 * (qii * di * di + qjj * dj * dj + 2.0 * qij * di * dj);
            let scale = 1.0 + (self.grad[i] * di).abs() + (self.grad[j] * dj).abs();
            debug_assert!(df <= 1e-9 * scale, "SMO step increased the objective by {df}");
        }
        self.a[i] = ai;
        self.a[j] = aj;
        if di == 0.0 && dj == 0.0 {
            return;
        }
        for t in 0..2 * self.n {
            self.grad[t] += self.q(t, i) * di + self.q(t, j) * dj;
        }
    }

    /// One active-set step: the Newton direction `d` on the free variables
    /// solving `Q_FF d + nu s_F = -grad_F`, `s_F' d = 0`, shortened to stay
    /// in the box. Returns whether the point moved.
    ///
    /// SMO converges linearly with a rate set by the conditioning of `Q`;
    /// polynomial kernels on a few dozen inputs make that rate useless,
    /// while the face is usually identified early.
    fn polish(&mut self) -> bool {
        let free: Vec<usize> = (0..2 * self.n).filter(|&t| self.a[t] > 0.0 && self.a[t] < self.c).collect();
        let f = free.len();
        if f < 2 {
            return false;
        }
        let mut m = DMatrix::zeros(f + 1, f + 1);
        let mut rhs = nalgebra::DVector::zeros(f + 1);
        for (r, &t) in free.iter().enumerate() {
            for (k, &u) in free.iter().enumerate() {
                m[(r, k)] = self.q(t, u);
            }
            m[(r, f)] = self.sign(t);
            m[(f, r)] = self.sign(t);
            rhs[r] = -self.grad[t];
        }
        let sol = match m.clone().lu().solve(&rhs) {
            Some(x) if x.iter().all(|v| v.is_finite()) => x,
            _ => match m.svd(true, true).solve(&rhs, 1e-12) {
                Ok(x) => x,
                Err(_) => return false,
            },
        };
        let d = &sol.as_slice()[..f];
        // Longest feasible fraction of the step.
        let mut tau: f64 = 1.0;
        for (&t, &dt) in free.iter().zip(d) {
            if dt > 0.0 {
                tau = tau.min((self.c - self.a[t]) / dt);
            } else if dt < 0.0 {
                tau = tau.min(-self.a[t] / dt);
            }
        }
        if !(tau > 0.0) {
            return false;
        }
        let mut lin = 0.0;
        let mut quad = 0.0;
        for (r, &t) in free.iter().enumerate() {
            lin += self.grad[t] * d[r];
            for (k, &u) in free.iter().enumerate() {
                quad += d[r] * self.q(t, u) * d[k];
            }
        }
        if !(tau * lin + 0.5 * tau * tau * quad < 0.0) {
            return false;
        }
        let snap = 1e-12 * self.c.max(1.0);
        let mut delta = vec![0.0; f];
        for (r, &t) in free.iter().enumerate() {
            let old = self.a[t];
            let mut v = old + tau * d[r];
            if v <= snap {
                v = 0.0;
            } else if v >= self.c - snap {
                v = self.c;
            }
            self.a[t] = v;
            delta[r] = v - old;
        }
        // Snapping can break s'a = 0 by rounding; put the residual on the
        // free variable with the most room.
        let resid: f64 = (0..2 * self.n).map(|t| self.sign(t) * self.a[t]).sum();
        if resid != 0.0 {
            if let Some((r, &t)) = free
                .iter()
                .enumerate()
                .filter(|(_, &t)| self.a[t] > 0.0 && self.a[t] < self.c)
                .max_by(|x, y| {
                    let room = |t: usize| self.a[t].min(self.c - self.a[t]);
                    room(*x.1).total_cmp(&room(*y.1))
                })
            {
                let v = (self.a[t] - self.sign(t) * resid).clamp(0.0, self.c);
                delta[r] += v - self.a[t];
                self.a[t] = v;
            }
        }
        for t in 0..2 * self.n {
            let mut g = 0.0;
            for (r, &u) in free.iter().enumerate() {
                if delta[r] != 0.0 {
                    g += self.q(t, u) * delta[r];
                }
            }
            self.grad[t] += g;
        }
        true
    }

    /// Bias from the current gradient: mean over free variables, otherwise
    /// the midpoint of the feasible interval.
    fn bias(&self) -> f64 {
        let mut ub = f64::INFINITY;
        let mut lb = f64::NEG_INFINITY;
        let mut sum_free = 0.0;
        let mut n_free = 0usize;
        for t in 0..2 * self.n {
            let s = self.sign(t);
            let yg = s * self.grad[t];
            if self.a[t] >= self.c {
                if s < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if self.a[t] <= 0.0 {
                if s > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                n_free += 1;
                sum_free += yg;
            }
        }
        let rho = if n_free > 0 {
            sum_free / n_free as f64
        } else {
            (ub + lb) / 2.0
        };
        -rho
    }
}

/// Solves the SVR dual. `warm` is an optional feasible starting point
/// `(alpha, alpha_star)`; infeasible starts are ignored.
pub fn solve_svr(
    problem: &SvrProblem<'_>,
    opts: &SmoOptions,
    warm: Option<(&[f64], &[f64])>,
) -> Result<SvrSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidHyperparam(format!(
            "SMO tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let n = problem.len();
    let c = problem.c;
    let mut a = vec![0.0; 2 * n];
    if let Some((wa, ws)) = warm {
        if wa.len() == n && ws.len() == n {
            let clipped: Vec<f64> = wa.iter().chain(ws).map(|v| v.clamp(0.0, c)).collect();
            let balance: f64 = clipped[..n].iter().sum::<f64>() - clipped[n..].iter().sum::<f64>();
            if balance.abs() <= 1e-10 * (1.0 + c * n as f64) {
                a = clipped;
            }
        }
    }
    let mut smo = Smo {
        prob: problem,
        n,
        c,
        a,
        grad: vec![0.0; 2 * n],
    };
    smo.init_gradient();

    let max_iter = opts.max_passes.unwrap_or(10 * n).max(1) * 2 * n;
    let mut iterations = 0;
    let mut converged = false;
    let mut gap = f64::INFINITY;
    let polish_every = 10 * n;
    while iterations < max_iter {
        if opts.polish && iterations > 0 && iterations % polish_every == 0 {
            smo.polish();
        }
        match smo.select(opts.selection) {
            None => {
                gap = 0.0;
                converged = true;
                break;
            }
            Some((i, j, g)) => {
                gap = g;
                if g < opts.tol || i == j {
                    converged = g < opts.tol;
                    break;
                }
                smo.update_pair(i, j);
            }
        }
        iterations += 1;
    }
    if !converged && iterations >= max_iter {
        if let Some((_, _, g)) = smo.select(opts.selection) {
            gap = g;
            converged = g < opts.tol;
        }
    }

    let b = smo.bias();
    let alpha = smo.a[..n].to_vec();
    let alpha_star = smo.a[n..].to_vec();
    let dual = dual_objective(problem, &alpha, &alpha_star);
    Ok(SvrSolution {
        alpha,
        alpha_star,
        b,
        dual_objective: dual,
        converged,
        iterations,
        kkt_gap: gap.max(0.0),
    })
}

/// `sum_n max(0, |f(x_n) - y_n| - eps)` with `f` evaluated on the training kernel.
pub fn training_eps_loss(problem: &SvrProblem<'_>, sol: &SvrSolution) -> f64 {
    let beta = sol.beta();
    (0..problem.len())
        .map(|i| {
            let f: f64 = (0..problem.len())
                .map(|j| problem.kernel[(i, j)] * beta[j])
                .sum::<f64>()
                + sol.b;
            ((f - problem.y[i]).abs() - problem.epsilon).max(0.0)
        })
        .sum()
}
