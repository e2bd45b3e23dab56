//! Dense interior-point reference for the epsilon-SVR dual, independent of
//! the SMO solver. Variables are `a = (alpha, alpha_star)`.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus, ZeroConeT};

pub struct OracleSolution {
    pub alpha: Vec<f64>,
    pub alpha_star: Vec<f64>,
    pub b: f64,
    /// Maximized dual value: `beta'y - eps sum(alpha + alpha_star) - 1/2 beta'K beta`.
    pub dual_objective: f64,
}

fn csc_from_dense(rows: usize, cols: usize, at: impl Fn(usize, usize) -> f64) -> CscMatrix<f64> {
    let mut colptr = vec![0];
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    for j in 0..cols {
        for i in 0..rows {
            let v = at(i, j);
            if v != 0.0 {
                rowval.push(i);
                nzval.push(v);
            }
        }
        colptr.push(rowval.len());
    }
    CscMatrix::new(rows, cols, colptr, rowval, nzval)
}

/// `kernel` is row-major `n x n`.
pub fn solve_dual(kernel: &[Vec<f64>], y: &[f64], c: f64, eps: f64) -> OracleSolution {
    let n = y.len();
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let p = csc_from_dense(2 * n, 2 * n, |r, col| {
        if r > col {
            0.0
        } else {
            sign(r) * sign(col) * kernel[r % n][col % n]
        }
    });
    let q: Vec<f64> = (0..2 * n)
        .map(|t| if t < n { eps - y[t] } else { eps + y[t - n] })
        .collect();
    // row 0: sum alpha - sum alpha_star = 0; rows 1..=2n: a >= 0; next 2n: a <= c
    let a = csc_from_dense(1 + 4 * n, 2 * n, |r, col| {
        if r == 0 {
            sign(col)
        } else if r <= 2 * n {
            if r - 1 == col { -1.0 } else { 0.0 }
        } else if r - 1 - 2 * n == col {
            1.0
        } else {
            0.0
        }
    });
    let mut b = vec![0.0; 1 + 2 * n];
    b.extend(std::iter::repeat_n(c, 2 * n));
    let cones = [ZeroConeT(1), NonnegativeConeT(4 * n)];
    let settings = DefaultSettings {
        verbose: false,
        tol_gap_abs: 1e-12,
        tol_gap_rel: 1e-12,
        tol_feas: 1e-12,
        tol_ktratio: 1e-10,
        max_iter: 500,
        ..DefaultSettings::default()
    };
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings).expect("oracle setup");
    solver.solve();
    let st = solver.solution.status;
    assert!(
        matches!(st, SolverStatus::Solved | SolverStatus::AlmostSolved),
        "oracle status {st:?}"
    );
    let x = &solver.solution.x;
    let alpha: Vec<f64> = x[..n].iter().map(|v| v.clamp(0.0, c)).collect();
    let alpha_star: Vec<f64> = x[n..].iter().map(|v| v.clamp(0.0, c)).collect();
    OracleSolution {
        b: solver.solution.z[0],
        dual_objective: dual_value(kernel, y, eps, &alpha, &alpha_star),
        alpha,
        alpha_star,
    }
}

pub fn dual_value(kernel: &[Vec<f64>], y: &[f64], eps: f64, alpha: &[f64], alpha_star: &[f64]) -> f64 {
    let n = y.len();
    let beta: Vec<f64> = (0..n).map(|i| alpha[i] - alpha_star[i]).collect();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += beta[i] * beta[j] * kernel[i][j];
        }
    }
    let lin: f64 = (0..n).map(|i| beta[i] * y[i] - eps * (alpha[i] + alpha_star[i])).sum();
    lin - 0.5 * quad
}

/// Predictions of the oracle model at `k_rows[q][n] = K(x_q, x_n)`.
pub fn predict(sol: &OracleSolution, k_rows: &[Vec<f64>]) -> Vec<f64> {
    k_rows
        .iter()
        .map(|row| {
            row.iter()
                .zip(sol.alpha.iter().zip(&sol.alpha_star))
                .map(|(k, (a, s))| k * (a - s))
                .sum::<f64>()
                + sol.b
        })
        .collect()
}
