//! Domain types shared by the solver, the optimizers and the runner.

use serde::Serialize;

use crate::error::{Error, Result};

/// Entry tolerance below zero for a weight vector to still count as a
/// simplex point.
pub const WEIGHT_ENTRY_TOL: f64 = 1e-12;
/// Tolerance on `|sum - 1|` for a simplex point.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// A point `x` in the shared parameter space.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionVector(Vec<f64>);

impl DecisionVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("decision vector must have d >= 1"));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("decision vector has non-finite entries"));
        }
        Ok(Self(coords))
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for DecisionVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Objective weights on the probability simplex.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    /// Validates nonnegativity (to [`WEIGHT_ENTRY_TOL`]) and unit sum (to
    /// [`WEIGHT_SUM_TOL`]). Entries are stored as given.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("simplex weights need at least one entry"));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("simplex weights have non-finite entries"));
        }
        if weights
            .iter()
            .any(|&w| !(-WEIGHT_ENTRY_TOL..=1.0 + WEIGHT_ENTRY_TOL).contains(&w))
        {
            return Err(Error::invalid(format!(
                "simplex weights out of [0, 1]: {weights:?}"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid(format!(
                "simplex weights sum to {sum}, expected 1"
            )));
        }
        Ok(Self(weights))
    }

    pub(crate) fn from_vec_unchecked(weights: Vec<f64>) -> Self {
        Self(weights)
    }

    pub fn uniform(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::invalid("simplex weights need at least one entry"));
        }
        Ok(Self(vec![1.0 / len as f64; len]))
    }

    /// Unit vector `e_k`.
    pub fn vertex(len: usize, k: usize) -> Result<Self> {
        if k >= len {
            return Err(Error::invalid(format!(
                "vertex {k} out of range for S={len}"
            )));
        }
        let mut w = vec![0.0; len];
        w[k] = 1.0;
        Ok(Self(w))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    /// `max_s |self_s - other_s|`.
    pub fn max_abs_diff(&self, other: &SimplexWeights) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl AsRef<[f64]> for SimplexWeights {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// `S x d` stack of per-objective gradients, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientMatrix {
    data: Vec<f64>,
    n_objectives: usize,
    dim: usize,
    stochastic: bool,
}

impl GradientMatrix {
    pub fn new(rows: Vec<Vec<f64>>, stochastic: bool) -> Result<Self> {
        let n_objectives = rows.len();
        if n_objectives == 0 {
            return Err(Error::invalid("gradient matrix needs S >= 1 rows"));
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(Error::invalid("gradient rows need d >= 1"));
        }
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("gradient rows have unequal lengths"));
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        Self::from_flat(data, n_objectives, dim, stochastic)
    }

    pub fn from_flat(
        data: Vec<f64>,
        n_objectives: usize,
        dim: usize,
        stochastic: bool,
    ) -> Result<Self> {
        if n_objectives == 0 || dim == 0 {
            return Err(Error::invalid("gradient matrix needs S >= 1 and d >= 1"));
        }
        if data.len() != n_objectives * dim {
            return Err(Error::invalid(format!(
                "gradient data has {} entries, expected {}x{}",
                data.len(),
                n_objectives,
                dim
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("gradient matrix has non-finite entries"));
        }
        Ok(Self {
            data,
            n_objectives,
            dim,
            stochastic,
        })
    }

    pub fn n_objectives(&self) -> usize {
        self.n_objectives
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_stochastic(&self) -> bool {
        self.stochastic
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.data[s * self.dim..(s + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub(crate) fn rows_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.data.chunks_exact_mut(self.dim)
    }

    pub(crate) fn set_stochastic(&mut self, stochastic: bool) {
        self.stochastic = stochastic;
    }

    /// Scales every entry by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::from_flat(
            self.data.iter().map(|v| v * c).collect(),
            self.n_objectives,
            self.dim,
            self.stochastic,
        )
    }

    /// Gram matrix `G G^T`, row-major `S x S`.
    pub fn gram(&self) -> Vec<f64> {
        let s = self.n_objectives;
        let mut m = vec![0.0; s * s];
        for i in 0..s {
            for j in i..s {
                let v = dot(self.row(i), self.row(j));
                m[i * s + j] = v;
                m[j * s + i] = v;
            }
        }
        m
    }
}

/// Gradient-evaluation counters. Every per-objective gradient and every
/// scalarized gradient costs one backpropagation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct OracleBudget {
    pub gradient_evals: u64,
    pub scalarized_evals: u64,
}

impl OracleBudget {
    pub fn charge_per_objective(&mut self, n_objectives: usize) {
        self.gradient_evals += n_objectives as u64;
    }

    pub fn charge_scalarized(&mut self) {
        self.gradient_evals += 1;
        self.scalarized_evals += 1;
    }

    pub fn total_bp(&self) -> u64 {
        self.gradient_evals
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub t: usize,
    pub eta: f64,
    pub alpha: f64,
    pub lambda: SimplexWeights,
    /// `f_s(x_t)` before the update.
    pub losses: Vec<f64>,
    /// `||sum_s lambda_s grad f_s(x_t)||^2` with exact gradients.
    pub weighted_grad_norm_sq: f64,
    pub stationarity_gap: Option<f64>,
    pub bp_cumulative: u64,
}

/// Per-iteration log of a run plus the final iterate `x_T`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    pub final_x: Vec<f64>,
    pub final_losses: Vec<f64>,
    pub budget: OracleBudget,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TrajectoryRecord> {
        self.records.last()
    }

    /// Weights `lambda_{T-1}` used by the last update.
    pub fn final_lambda(&self) -> Option<&SimplexWeights> {
        self.records.last().map(|r| &r.lambda)
    }
}

/// `sum_s lambda_s G[s]`.
pub fn weighted_direction(grads: &GradientMatrix, lambda: &SimplexWeights) -> Result<Vec<f64>> {
    if lambda.len() != grads.n_objectives() {
        return Err(Error::invalid(format!(
            "lambda has {} entries but G has {} rows",
            lambda.len(),
            grads.n_objectives()
        )));
    }
    let mut out = vec![0.0; grads.dim()];
    for (row, &w) in grads.rows().zip(lambda.as_slice()) {
        for (o, g) in out.iter_mut().zip(row) {
            *o += w * g;
        }
    }
    Ok(out)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}
