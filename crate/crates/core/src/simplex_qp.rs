//! Min-norm point of the convex hull of a set of gradients.
//!
//! Solves `min_lambda ||sum_s lambda_s g_s||^2` over the probability simplex
//! with Frank-Wolfe and exact line search. Away steps (shifting weight off
//! the worst supported vertex) keep convergence linear when the optimum sits
//! on a face of the simplex. Everything runs on the `S x S` Gram matrix, so
//! an iteration costs `O(S)` regardless of `d`.
//!
//! A solve is `converged` when both gaps are within `tol * max(1, |d|^2)`:
//! `|d|^2 - min_s g_s.d` and `max_{lambda_s > 0} g_s.d - |d|^2`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{dot, norm_sq, weighted_direction, GradientMatrix, SimplexWeights};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: usize = 250;

/// Entries are treated as already feasible when every weight is nonnegative
/// and the sum is within this distance of one.
const FEASIBLE_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QpOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QpSolution {
    pub lambda: SimplexWeights,
    pub min_norm_sq: f64,
    pub iterations_used: usize,
    pub converged: bool,
}

/// `gamma` in `[0, 1]` minimizing `||gamma g1 + (1 - gamma) g2||^2`.
///
/// Identical inputs return 0.5.
pub fn two_vector_gamma(g1: &[f64], g2: &[f64]) -> f64 {
    let diff: Vec<f64> = g1.iter().zip(g2).map(|(a, b)| a - b).collect();
    let denom = norm_sq(&diff);
    if denom == 0.0 {
        return 0.5;
    }
    // (g2 - g1) . g2 = -(diff . g2)
    (-dot(&diff, g2) / denom).clamp(0.0, 1.0)
}

/// Same line search expressed through inner products:
/// `aa = g1.g1`, `ab = g1.g2`, `bb = g2.g2`.
fn gamma_from_products(aa: f64, ab: f64, bb: f64) -> f64 {
    let denom = aa - 2.0 * ab + bb;
    if denom <= 0.0 {
        return 0.5;
    }
    ((bb - ab) / denom).clamp(0.0, 1.0)
}

pub fn min_norm_point(grads: &GradientMatrix, tol: f64, max_iters: usize) -> Result<QpSolution> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::invalid(format!("tol must be positive, got {tol}")));
    }
    if max_iters == 0 {
        return Err(Error::invalid("max_iters must be >= 1"));
    }
    let s = grads.n_objectives();
    if s == 0 {
        return Err(Error::invalid("min_norm_point needs S >= 1"));
    }
    if grads.rows().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("gradient matrix has non-finite entries"));
    }

    if s == 1 {
        return finish(grads, vec![1.0], 0, true);
    }
    if grads.rows().flatten().all(|&v| v == 0.0) {
        return Ok(QpSolution {
            lambda: SimplexWeights::uniform(s)?,
            min_norm_sq: 0.0,
            iterations_used: 0,
            converged: true,
        });
    }
    if s == 2 {
        let gamma = two_vector_gamma(grads.row(0), grads.row(1));
        return finish(grads, vec![gamma, 1.0 - gamma], 1, true);
    }

    let gram = grads.gram();
    let mut lambda = vec![1.0 / s as f64; s];
    // p = G d, so p_s = g_s . d
    let mut p: Vec<f64> = (0..s)
        .map(|i| (0..s).map(|j| gram[i * s + j] * lambda[j]).sum())
        .collect();
    let mut converged = false;
    let mut iterations = 0;

    loop {
        let dd = dot(&lambda, &p);
        let (k, pk) = argmin(&p);
        let (a, pa) = away_vertex(&lambda, &p);
        let (fw_gap, away_gap) = (dd - pk, pa - dd);
        if fw_gap.max(away_gap) <= tol * dd.max(1.0) {
            converged = true;
            break;
        }
        if iterations == max_iters {
            break;
        }
        iterations += 1;
        if fw_gap >= away_gap {
            let gamma = gamma_from_products(gram[k * s + k], pk, dd);
            for (li, pi) in lambda.iter_mut().zip(p.iter_mut()) {
                *li *= 1.0 - gamma;
                *pi *= 1.0 - gamma;
            }
            lambda[k] += gamma;
            for (i, pi) in p.iter_mut().enumerate() {
                *pi += gamma * gram[i * s + k];
            }
        } else {
            // move weight away from vertex a: lambda <- (1 + gamma) lambda - gamma e_a
            let gamma_max = lambda[a] / (1.0 - lambda[a]);
            let curvature = dd - 2.0 * pa + gram[a * s + a];
            let gamma = if curvature > 0.0 {
                (away_gap / curvature).min(gamma_max)
            } else {
                gamma_max
            };
            for (li, pi) in lambda.iter_mut().zip(p.iter_mut()) {
                *li *= 1.0 + gamma;
                *pi *= 1.0 + gamma;
            }
            lambda[a] = if gamma == gamma_max {
                0.0
            } else {
                lambda[a] - gamma
            };
            for (i, pi) in p.iter_mut().enumerate() {
                *pi -= gamma * gram[i * s + a];
            }
        }
        if let Some(exact) = support_minimizer(&gram, &lambda) {
            let exact_p: Vec<f64> = (0..s)
                .map(|i| (0..s).map(|j| gram[i * s + j] * exact[j]).sum())
                .collect();
            if dot(&exact, &exact_p) < dot(&lambda, &p) {
                lambda = exact;
                p = exact_p;
            }
        }
    }
    finish(grads, lambda, iterations, converged)
}

/// Solve with [`QpOptions`].
pub fn min_norm_point_with(grads: &GradientMatrix, opts: &QpOptions) -> Result<QpSolution> {
    min_norm_point(grads, opts.tol, opts.max_iters)
}

// lowest index wins ties
fn argmin(values: &[f64]) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < best.1 {
            best = (i, v);
        }
    }
    best
}

/// Min-norm point of the affine hull of the supported vertices, if it lies
/// strictly inside their face.
fn support_minimizer(gram: &[f64], lambda: &[f64]) -> Option<Vec<f64>> {
    let s = lambda.len();
    let support: Vec<usize> = (0..s).filter(|&i| lambda[i] > 0.0).collect();
    let m = support.len();
    if m < 2 {
        return None;
    }
    // [G_SS 1; 1^T 0] [w; nu] = [0; 1]
    let kkt = DMatrix::from_fn(m + 1, m + 1, |i, j| match (i < m, j < m) {
        (true, true) => gram[support[i] * s + support[j]],
        (false, false) => 0.0,
        _ => 1.0,
    });
    let mut rhs = DVector::zeros(m + 1);
    rhs[m] = 1.0;
    let w = kkt.lu().solve(&rhs)?;
    if (0..m).any(|i| !(w[i] > 0.0)) {
        return None;
    }
    let mut out = vec![0.0; s];
    for (i, &idx) in support.iter().enumerate() {
        out[idx] = w[i];
    }
    Some(out)
}

// largest p over the support; lowest index wins ties
fn away_vertex(lambda: &[f64], p: &[f64]) -> (usize, f64) {
    let mut best: Option<(usize, f64)> = None;
    for (i, (&l, &v)) in lambda.iter().zip(p).enumerate() {
        if l > 0.0 && best.is_none_or(|b| v > b.1) {
            best = Some((i, v));
        }
    }
    best.expect("simplex weights have non-empty support")
}

fn finish(
    grads: &GradientMatrix,
    raw: Vec<f64>,
    iterations_used: usize,
    converged: bool,
) -> Result<QpSolution> {
    let lambda = project_simplex(&raw)?;
    let d = weighted_direction(grads, &lambda)?;
    Ok(QpSolution {
        min_norm_sq: norm_sq(&d),
        lambda,
        iterations_used,
        converged,
    })
}

/// Euclidean projection onto `{lambda >= 0, sum lambda = 1}` by sorting and
/// thresholding. Inputs that are already feasible come back unchanged, which
/// makes the projection idempotent bit for bit.
pub fn project_simplex(v: &[f64]) -> Result<SimplexWeights> {
    if v.is_empty() {
        return Err(Error::invalid("cannot project an empty vector"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("cannot project a non-finite vector"));
    }
    let sum: f64 = v.iter().sum();
    if v.iter().all(|&x| (0.0..=1.0).contains(&x)) && (sum - 1.0).abs() <= FEASIBLE_SUM_TOL {
        return Ok(SimplexWeights::from_vec_unchecked(v.to_vec()));
    }

    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (i + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    let projected = v.iter().map(|&x| (x - theta).clamp(0.0, 1.0)).collect();
    Ok(SimplexWeights::from_vec_unchecked(projected))
}
