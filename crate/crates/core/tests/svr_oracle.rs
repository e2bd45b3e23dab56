#[allow(dead_code)]
mod common;

use common::qp_oracle;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sprayq_core::kernels::{gram_matrix, KernelSpec};
use sprayq_core::svr::{self, PairSelection, SmoOptions};
use sprayq_core::{Hyperparams, SvrProblem};

fn rows(k: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..k.nrows()).map(|i| k.row(i).iter().copied().collect()).collect()
}

fn sine_problem() -> (DMatrix<f64>, Vec<f64>) {
    let x: Vec<Vec<f64>> = (0..20).map(|i| vec![-1.5 + 3.0 * i as f64 / 19.0]).collect();
    let y: Vec<f64> = x.iter().map(|r| (2.0 * r[0]).sin()).collect();
    (gram_matrix(&KernelSpec::Gaussian { sigma2: 0.25 }, &x).unwrap(), y)
}

#[test]
fn sine_dual_matches_qp_oracle() {
    let (k, y) = sine_problem();
    for c in [0.5, 10.0] {
        let problem = SvrProblem::new(&k, &y, c, 0.1).unwrap();
        let oracle = qp_oracle::solve_dual(&rows(&k), &y, c, 0.1);
        for selection in [PairSelection::MaximalViolation, PairSelection::SecondOrder] {
            let opts = SmoOptions { tol: Hyperparams::default().smo.tol, selection, ..SmoOptions::default() };
            let sol = svr::solve_svr(&problem, &opts, None).unwrap();
            assert!(sol.converged);
            let rel = (sol.dual_objective - oracle.dual_objective).abs() / oracle.dual_objective.abs();
            assert!(rel <= 1e-4, "C={c} {selection:?}: smo {} oracle {} rel {rel:e}", sol.dual_objective, oracle.dual_objective);
        }
    }
}

fn random_problem(rng: &mut ChaCha8Rng) -> (DMatrix<f64>, Vec<f64>, f64, f64) {
    let n = 10;
    let d = rng.random_range(1..4);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let spec = match rng.random_range(0..3) {
        0 => KernelSpec::Linear,
        1 => KernelSpec::Polynomial { degree: 2 },
        _ => KernelSpec::Gaussian { sigma2: rng.random_range(0.05..0.5) },
    };
    let c = 10f64.powf(rng.random_range(-1.0..2.0));
    let eps = rng.random_range(0.0..0.3);
    (gram_matrix(&spec, &x).unwrap(), y, c, eps)
}

#[test]
fn dual_objective_matches_oracle_on_random_problems() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..40 {
        let (k, y, c, eps) = random_problem(&mut rng);
        let problem = SvrProblem::new(&k, &y, c, eps).unwrap();
        let oracle = qp_oracle::solve_dual(&rows(&k), &y, c, eps);
        // the formula itself, evaluated at the oracle optimum
        let at_oracle = svr::dual_objective(&problem, &oracle.alpha, &oracle.alpha_star);
        assert!((at_oracle - oracle.dual_objective).abs() <= 1e-9 * (1.0 + oracle.dual_objective.abs()));
        let opts = SmoOptions { tol: 1e-9, ..SmoOptions::default() };
        let sol = svr::solve_svr(&problem, &opts, None).unwrap();
        assert!(sol.converged, "case {case}");
        let diff = (sol.dual_objective - oracle.dual_objective).abs();
        assert!(diff <= 1e-6, "case {case}: smo {} oracle {} diff {diff:e}", sol.dual_objective, oracle.dual_objective);
    }
}

#[test]
fn predictions_match_oracle_including_bias() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    for _ in 0..40 {
        let (k, y, c, eps) = random_problem(&mut rng);
        let problem = SvrProblem::new(&k, &y, c, eps).unwrap();
        let opts = SmoOptions { tol: 1e-10, max_passes: Some(2_000), ..SmoOptions::default() };
        let sol = svr::solve_svr(&problem, &opts, None).unwrap();
        assert!(sol.converged);
        // the bias is unique only when some multiplier is strictly inside (0, C)
        let free = sol.alpha.iter().chain(&sol.alpha_star).any(|&a| a > 1e-6 * c && a < c * (1.0 - 1e-6));
        if !free {
            continue;
        }
        let oracle = qp_oracle::solve_dual(&rows(&k), &y, c, eps);
        let f_oracle = qp_oracle::predict(&oracle, &rows(&k));
        for (i, fo) in f_oracle.iter().enumerate() {
            let f = sol.decision_function(&rows(&k)[i]).unwrap();
            assert!((f - fo).abs() <= 1e-5 * (1.0 + fo.abs()), "row {i}: {f} vs {fo}");
        }
        checked += 1;
    }
    assert!(checked >= 20, "only {checked} problems had free multipliers");
}

#[test]
fn dual_objective_is_maximal_over_feasible_perturbations() {
    let (k, y) = sine_problem();
    let problem = SvrProblem::new(&k, &y, 2.0, 0.1).unwrap();
    let opts = SmoOptions { tol: 1e-9, ..SmoOptions::default() };
    let sol = svr::solve_svr(&problem, &opts, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let (i, j) = (rng.random_range(0..20), rng.random_range(0..20));
        let t = rng.random_range(-0.05..0.05);
        let mut a = sol.alpha.clone();
        let mut s = sol.alpha_star.clone();
        // moving alpha_i and alpha_star_j together keeps sum(alpha - alpha_star) fixed
        a[i] += t;
        s[j] += t;
        if a[i] < 0.0 || a[i] > 2.0 || s[j] < 0.0 || s[j] > 2.0 {
            continue;
        }
        assert!(svr::dual_objective(&problem, &a, &s) <= sol.dual_objective + 1e-9);
    }
}
