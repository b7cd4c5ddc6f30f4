//! Built-in verification: finite-difference gradient checks and the
//! brute-force comparison of the min-norm solver.

use serde::Serialize;

use crate::error::Result;
use crate::problems::{gradient_check, GradientCheck, Suite, FD_REL_TOL, FD_STEP};
use crate::rng::RngStream;
use crate::simplex_qp::{min_norm_point, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use crate::types::{dot, GradientMatrix};

use super::experiments::{gc_suite, SUITE_STREAM};

pub const GRADIENT_POINTS: usize = 100;
pub const GRADIENT_BOX: f64 = 2.0;
pub const QP_SHAPES: [(usize, usize); 3] = [(2, 2), (3, 3), (3, 8)];
pub const QP_INSTANCES: usize = 100;
pub const GRID_STEP: f64 = 1e-3;
pub const GRID_ABS_TOL: f64 = 1e-4;

/// One suite of each kind.
pub fn selftest_suites(seed: u64) -> Result<Vec<Suite>> {
    let mut rng = RngStream::new(seed, SUITE_STREAM);
    let centers = (0..3).map(|_| rng.normal_draw(5)).collect();
    Ok(vec![
        Suite::fonseca(5)?,
        Suite::quadratic(centers, vec![0.5, 1.0, 2.0])?,
        gc_suite()?.0,
    ])
}

pub fn gradient_checks(seed: u64) -> Result<Vec<GradientCheck>> {
    let mut rng = RngStream::new(seed, SUITE_STREAM + 1);
    Ok(selftest_suites(seed)?
        .iter()
        .map(|suite| {
            gradient_check(
                suite,
                GRADIENT_POINTS,
                GRADIENT_BOX,
                FD_STEP,
                FD_REL_TOL,
                &mut rng,
            )
        })
        .collect())
}

/// `min_lambda lambda^T M lambda` over the simplex grid with spacing
/// `step`, for `S <= 3`.
pub fn grid_min_norm_sq(gram: &[f64], n_objectives: usize, step: f64) -> f64 {
    let n = (1.0 / step).round() as usize;
    let h = 1.0 / n as f64;
    let quad = |l: &[f64]| -> f64 {
        let s = l.len();
        (0..s)
            .map(|i| (0..s).map(|j| l[i] * gram[i * s + j] * l[j]).sum::<f64>())
            .sum()
    };
    let mut best = f64::INFINITY;
    match n_objectives {
        1 => best = gram[0],
        2 => {
            for i in 0..=n {
                let a = i as f64 * h;
                best = best.min(quad(&[a, 1.0 - a]));
            }
        }
        3 => {
            for i in 0..=n {
                for j in 0..=(n - i) {
                    let (a, b) = (i as f64 * h, j as f64 * h);
                    best = best.min(quad(&[a, b, (1.0 - a - b).max(0.0)]));
                }
            }
        }
        _ => panic!("grid search supports at most three objectives"),
    }
    best
}

/// The optimality conditions of the min-norm problem at `tol`: every
/// supported vertex lies on the supporting hyperplane through `d`, and no
/// vertex lies strictly below it.
pub fn kkt_holds(grads: &GradientMatrix, lambda: &[f64], tol: f64) -> bool {
    let d: Vec<f64> = (0..grads.dim())
        .map(|i| {
            (0..grads.n_objectives())
                .map(|s| lambda[s] * grads.row(s)[i])
                .sum()
        })
        .collect();
    let dd = dot(&d, &d);
    let slack = 10.0 * tol * dd.max(1.0);
    (0..grads.n_objectives()).all(|s| {
        let p = dot(grads.row(s), &d);
        p >= dd - slack && (lambda[s] <= tol || (p - dd).abs() <= slack)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QpOracleReport {
    pub n_objectives: usize,
    pub dim: usize,
    pub instances: usize,
    pub max_abs_error: f64,
    pub converged: usize,
    pub kkt_failures: usize,
    pub passed: bool,
}

/// Gaussian instances per shape against the grid.
pub fn qp_oracle(seed: u64, instances: usize) -> Result<Vec<QpOracleReport>> {
    let mut rng = RngStream::new(seed, SUITE_STREAM + 2);
    QP_SHAPES
        .iter()
        .map(|&(s, d)| {
            let mut report = QpOracleReport {
                n_objectives: s,
                dim: d,
                instances,
                max_abs_error: 0.0,
                converged: 0,
                kkt_failures: 0,
                passed: false,
            };
            for _ in 0..instances {
                let grads = GradientMatrix::from_flat(rng.normal_draw(s * d), s, d, false)?;
                let sol = min_norm_point(&grads, DEFAULT_TOL, DEFAULT_MAX_ITERS)?;
                let grid = grid_min_norm_sq(&grads.gram(), s, GRID_STEP);
                report.max_abs_error = report.max_abs_error.max((sol.min_norm_sq - grid).abs());
                if sol.converged {
                    report.converged += 1;
                    if !kkt_holds(&grads, sol.lambda.as_slice(), DEFAULT_TOL) {
                        report.kkt_failures += 1;
                    }
                }
            }
            report.passed = report.max_abs_error <= GRID_ABS_TOL && report.kkt_failures == 0;
            Ok(report)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_on_known_instance() {
        // e1 and e2: minimum at (1/2, 1/2) with norm^2 1/2
        let gram = [1.0, 0.0, 0.0, 1.0];
        assert!((grid_min_norm_sq(&gram, 2, 1e-3) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kkt_rejects_non_optimal_weights() {
        let g = GradientMatrix::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], false).unwrap();
        assert!(kkt_holds(&g, &[0.5, 0.5], 1e-8));
        assert!(!kkt_holds(&g, &[0.6, 0.4], 1e-8));
    }

    #[test]
    fn small_oracle_run_passes() {
        let reports = qp_oracle(3, 4).unwrap();
        assert!(reports.iter().all(|r| r.passed), "{reports:?}");
    }

    #[test]
    fn gradients_pass() {
        assert!(gradient_checks(0).unwrap().iter().all(|c| c.passed));
    }
}
