//! Analytic objective suites with exact gradients, plus the additive
//! Gaussian noise oracle used by the stochastic optimizers.
//!
//! Smoothness of the Fonseca objectives: with `r = x - c` and
//! `f = 1 - exp(-|r|^2)`, the Hessian is `exp(-|r|^2) (2 I - 4 r r^T)`. Its
//! eigenvalues are `2 e^{-|r|^2}` and `(2 - 4|r|^2) e^{-|r|^2}`; the first
//! peaks at 2 when `r = 0` and the second stays below `4 e^{-3/2} < 2` in
//! magnitude, so `L = 2`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::types::{dot, weighted_direction, GradientMatrix, OracleBudget, SimplexWeights};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexityClass {
    StronglyConvex,
    Convex,
    Nonconvex,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SuiteConstants {
    /// Gradient Lipschitz constant `L`.
    pub smoothness: f64,
    /// Strong convexity modulus `mu`; zero when not strongly convex.
    pub strong_convexity: f64,
    pub class: ConvexityClass,
}

/// Two-objective Fonseca problem in `d` dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct FonsecaSuite {
    dim: usize,
}

impl FonsecaSuite {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("Fonseca suite needs d >= 1"));
        }
        Ok(Self { dim })
    }

    fn offset(&self) -> f64 {
        1.0 / (self.dim as f64).sqrt()
    }

    fn sq_dists(&self, x: &[f64]) -> (f64, f64) {
        let c = self.offset();
        let a = x.iter().map(|v| (v - c).powi(2)).sum();
        let b = x.iter().map(|v| (v + c).powi(2)).sum();
        (a, b)
    }

    pub fn values(&self, x: &[f64]) -> [f64; 2] {
        let (a, b) = self.sq_dists(x);
        [1.0 - (-a).exp(), 1.0 - (-b).exp()]
    }

    pub fn gradients(&self, x: &[f64]) -> GradientMatrix {
        let c = self.offset();
        let (a, b) = self.sq_dists(x);
        let (ea, eb) = ((-a).exp(), (-b).exp());
        let mut data = Vec::with_capacity(2 * self.dim);
        data.extend(x.iter().map(|v| 2.0 * (v - c) * ea));
        data.extend(x.iter().map(|v| 2.0 * (v + c) * eb));
        GradientMatrix::from_flat(data, 2, self.dim, false).expect("finite Fonseca gradient")
    }
}

/// `f_s(x) = (a_s / 2) |x - c_s|^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticSuite {
    centers: Vec<Vec<f64>>,
    scales: Vec<f64>,
    dim: usize,
}

impl QuadraticSuite {
    pub fn new(centers: Vec<Vec<f64>>, scales: Vec<f64>) -> Result<Self> {
        if centers.is_empty() || centers.len() != scales.len() {
            return Err(Error::invalid(format!(
                "quadratic suite needs matching centers ({}) and scales ({})",
                centers.len(),
                scales.len()
            )));
        }
        let dim = centers[0].len();
        if dim == 0 || centers.iter().any(|c| c.len() != dim) {
            return Err(Error::invalid(
                "quadratic centers must share a dimension d >= 1",
            ));
        }
        if let Some(a) = scales.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
            return Err(Error::invalid(format!(
                "quadratic scale must be positive, got {a}"
            )));
        }
        if centers.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("quadratic centers must be finite"));
        }
        Ok(Self {
            centers,
            scales,
            dim,
        })
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn values(&self, x: &[f64]) -> Vec<f64> {
        self.centers
            .iter()
            .zip(&self.scales)
            .map(|(c, a)| {
                0.5 * a
                    * x.iter()
                        .zip(c)
                        .map(|(xi, ci)| (xi - ci).powi(2))
                        .sum::<f64>()
            })
            .collect()
    }

    pub fn gradients(&self, x: &[f64]) -> GradientMatrix {
        let data = self
            .centers
            .iter()
            .zip(&self.scales)
            .flat_map(|(c, &a)| x.iter().zip(c).map(move |(xi, ci)| a * (xi - ci)))
            .collect();
        GradientMatrix::from_flat(data, self.centers.len(), self.dim, false)
            .expect("quadratic gradient dimensions")
    }

    /// Minimizer of `sum_s lambda_s f_s`: `(sum lambda_s a_s)^{-1} sum lambda_s a_s c_s`.
    pub fn weighted_minimizer(&self, lambda: &SimplexWeights) -> Result<Vec<f64>> {
        if lambda.len() != self.centers.len() {
            return Err(Error::invalid("lambda length does not match the suite"));
        }
        let total: f64 = lambda
            .as_slice()
            .iter()
            .zip(&self.scales)
            .map(|(l, a)| l * a)
            .sum();
        let mut out = vec![0.0; self.dim];
        for ((c, a), l) in self.centers.iter().zip(&self.scales).zip(lambda.as_slice()) {
            for (o, ci) in out.iter_mut().zip(c) {
                *o += l * a * ci;
            }
        }
        out.iter_mut().for_each(|o| *o /= total);
        Ok(out)
    }
}

/// `f_s(x) = 0.5 |P_s x - b_s|^2` with wide (`rows < d`) maps, so no
/// objective is strongly convex.
#[derive(Clone, Debug, PartialEq)]
pub struct LeastSquaresSuite {
    maps: Vec<DMatrix<f64>>,
    targets: Vec<DVector<f64>>,
    dim: usize,
    smoothness: f64,
}

impl LeastSquaresSuite {
    /// `maps[s]` is row-major `rows_s x d`.
    pub fn new(maps: Vec<Vec<Vec<f64>>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        if maps.is_empty() || maps.len() != targets.len() {
            return Err(Error::invalid(
                "least-squares suite needs matching maps and targets",
            ));
        }
        let dim = maps[0].first().map(Vec::len).unwrap_or(0);
        if dim == 0 {
            return Err(Error::invalid("least-squares maps need d >= 1 columns"));
        }
        let mut mats = Vec::with_capacity(maps.len());
        let mut vecs = Vec::with_capacity(maps.len());
        for (m, b) in maps.into_iter().zip(targets) {
            let rows = m.len();
            if rows == 0 || m.iter().any(|r| r.len() != dim) {
                return Err(Error::invalid(
                    "least-squares map rows must all have length d",
                ));
            }
            if rows >= dim {
                return Err(Error::invalid(format!(
                    "least-squares map has {rows} rows for d={dim}; rows < d keeps mu = 0"
                )));
            }
            if b.len() != rows {
                return Err(Error::invalid(
                    "least-squares target length must match map rows",
                ));
            }
            if m.iter().flatten().chain(&b).any(|v| !v.is_finite()) {
                return Err(Error::invalid("least-squares data must be finite"));
            }
            mats.push(DMatrix::from_row_iterator(
                rows,
                dim,
                m.into_iter().flatten(),
            ));
            vecs.push(DVector::from_vec(b));
        }
        let smoothness = mats
            .iter()
            .map(|p| {
                let ptp = p.transpose() * p;
                ptp.symmetric_eigenvalues()
                    .iter()
                    .cloned()
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        Ok(Self {
            maps: mats,
            targets: vecs,
            dim,
            smoothness,
        })
    }

    /// Random Gaussian maps of the given rank, rescaled so that every
    /// `|P_s^T P_s|_2` equals `smoothness`, with consistent targets
    /// `b_s = P_s x_ref`. Returns the suite and `x_ref`, which minimizes every
    /// objective at once.
    pub fn random_consistent(
        n_objectives: usize,
        dim: usize,
        rank: usize,
        smoothness: f64,
        rng: &mut RngStream,
    ) -> Result<(Self, Vec<f64>)> {
        if rank == 0 || rank >= dim {
            return Err(Error::invalid(format!(
                "need 1 <= rank < d, got rank={rank}, d={dim}"
            )));
        }
        let x_ref: Vec<f64> = (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let mut maps = Vec::with_capacity(n_objectives);
        let mut targets = Vec::with_capacity(n_objectives);
        for _ in 0..n_objectives {
            let raw = DMatrix::from_row_iterator(rank, dim, rng.normal_draw(rank * dim));
            let top = (raw.transpose() * &raw)
                .symmetric_eigenvalues()
                .iter()
                .cloned()
                .fold(0.0, f64::max);
            let p = raw * (smoothness / top).sqrt();
            let b = &p * DVector::from_column_slice(&x_ref);
            maps.push(p.row_iter().map(|r| r.iter().cloned().collect()).collect());
            targets.push(b.iter().cloned().collect());
        }
        Ok((Self::new(maps, targets)?, x_ref))
    }

    pub fn values(&self, x: &[f64]) -> Vec<f64> {
        let xv = DVector::from_column_slice(x);
        self.maps
            .iter()
            .zip(&self.targets)
            .map(|(p, b)| 0.5 * (p * &xv - b).norm_squared())
            .collect()
    }

    pub fn gradients(&self, x: &[f64]) -> GradientMatrix {
        let xv = DVector::from_column_slice(x);
        let data = self
            .maps
            .iter()
            .zip(&self.targets)
            .flat_map(|(p, b)| {
                (p.transpose() * (p * &xv - b))
                    .iter()
                    .cloned()
                    .collect::<Vec<_>>()
            })
            .collect();
        GradientMatrix::from_flat(data, self.maps.len(), self.dim, false)
            .expect("least-squares gradient dimensions")
    }

    /// Minimum-norm minimizer of `sum_s lambda_s f_s`, from the normal
    /// equations via SVD.
    pub fn weighted_minimizer(&self, lambda: &SimplexWeights) -> Result<Vec<f64>> {
        if lambda.len() != self.maps.len() {
            return Err(Error::invalid("lambda length does not match the suite"));
        }
        let mut lhs = DMatrix::<f64>::zeros(self.dim, self.dim);
        let mut rhs = DVector::<f64>::zeros(self.dim);
        for ((p, b), &l) in self.maps.iter().zip(&self.targets).zip(lambda.as_slice()) {
            lhs += p.transpose() * p * l;
            rhs += p.transpose() * b * l;
        }
        let sol = lhs
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::invalid(format!("normal equations: {e}")))?;
        Ok(sol.iter().cloned().collect())
    }
}

/// An objective suite selected at run time.
#[derive(Clone, Debug, PartialEq)]
pub enum Suite {
    Fonseca(FonsecaSuite),
    Quadratic(QuadraticSuite),
    LeastSquares(LeastSquaresSuite),
}

impl Suite {
    pub fn fonseca(dim: usize) -> Result<Self> {
        Ok(Suite::Fonseca(FonsecaSuite::new(dim)?))
    }

    /// The non-convex instance; this is the Fonseca problem.
    pub fn nonconvex(dim: usize) -> Result<Self> {
        Self::fonseca(dim)
    }

    pub fn quadratic(centers: Vec<Vec<f64>>, scales: Vec<f64>) -> Result<Self> {
        Ok(Suite::Quadratic(QuadraticSuite::new(centers, scales)?))
    }

    pub fn least_squares(maps: Vec<Vec<Vec<f64>>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        Ok(Suite::LeastSquares(LeastSquaresSuite::new(maps, targets)?))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Fonseca(_) => "fonseca",
            Suite::Quadratic(_) => "quadratic",
            Suite::LeastSquares(_) => "convex_ls",
        }
    }

    pub fn n_objectives(&self) -> usize {
        match self {
            Suite::Fonseca(_) => 2,
            Suite::Quadratic(q) => q.centers.len(),
            Suite::LeastSquares(l) => l.maps.len(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Suite::Fonseca(f) => f.dim,
            Suite::Quadratic(q) => q.dim,
            Suite::LeastSquares(l) => l.dim,
        }
    }

    pub fn constants(&self) -> SuiteConstants {
        match self {
            Suite::Fonseca(_) => SuiteConstants {
                smoothness: 2.0,
                strong_convexity: 0.0,
                class: ConvexityClass::Nonconvex,
            },
            Suite::Quadratic(q) => SuiteConstants {
                smoothness: q.scales.iter().cloned().fold(f64::MIN, f64::max),
                strong_convexity: q.scales.iter().cloned().fold(f64::MAX, f64::min),
                class: ConvexityClass::StronglyConvex,
            },
            Suite::LeastSquares(l) => SuiteConstants {
                smoothness: l.smoothness,
                strong_convexity: 0.0,
                class: ConvexityClass::Convex,
            },
        }
    }

    pub fn values(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Suite::Fonseca(f) => f.values(x).to_vec(),
            Suite::Quadratic(q) => q.values(x),
            Suite::LeastSquares(l) => l.values(x),
        }
    }

    pub fn gradients(&self, x: &[f64]) -> GradientMatrix {
        match self {
            Suite::Fonseca(f) => f.gradients(x),
            Suite::Quadratic(q) => q.gradients(x),
            Suite::LeastSquares(l) => l.gradients(x),
        }
    }

    /// `G(x, lambda) = sum_s lambda_s f_s(x)`.
    pub fn weighted_value(&self, x: &[f64], lambda: &SimplexWeights) -> f64 {
        dot(&self.values(x), lambda.as_slice())
    }

    /// Minimizer of `G(., lambda)` where one is available in closed form.
    pub fn weighted_minimizer(&self, lambda: &SimplexWeights) -> Result<Vec<f64>> {
        match self {
            Suite::Quadratic(q) => q.weighted_minimizer(lambda),
            Suite::LeastSquares(l) => l.weighted_minimizer(lambda),
            Suite::Fonseca(_) => Err(Error::Unsupported(
                "Fonseca has no closed-form weighted minimizer".into(),
            )),
        }
    }
}

pub fn fonseca_eval(x: &[f64]) -> Result<[f64; 2]> {
    Ok(FonsecaSuite::new(x.len())?.values(x))
}

pub fn fonseca_grad(x: &[f64]) -> Result<GradientMatrix> {
    Ok(FonsecaSuite::new(x.len())?.gradients(x))
}

/// Worst central-difference mismatch over a set of points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradientCheck {
    pub suite: String,
    pub points: usize,
    /// `max |fd - analytic| / max(|analytic|, 1)` over all entries.
    pub max_rel_error: f64,
    pub passed: bool,
}

pub const FD_STEP: f64 = 1e-6;
pub const FD_REL_TOL: f64 = 1e-4;

/// Central differences with step `h` at `points` uniform draws in
/// `[-half_width, half_width]^d`.
pub fn gradient_check(
    suite: &Suite,
    points: usize,
    half_width: f64,
    h: f64,
    rel_tol: f64,
    rng: &mut RngStream,
) -> GradientCheck {
    let d = suite.dim();
    let mut worst = 0.0f64;
    for _ in 0..points {
        let x: Vec<f64> = (0..d)
            .map(|_| rng.uniform(-half_width, half_width))
            .collect();
        let grads = suite.gradients(&x);
        let mut probe = x.clone();
        for i in 0..d {
            probe[i] = x[i] + h;
            let up = suite.values(&probe);
            probe[i] = x[i] - h;
            let down = suite.values(&probe);
            probe[i] = x[i];
            for s in 0..suite.n_objectives() {
                let fd = (up[s] - down[s]) / (2.0 * h);
                let analytic = grads.row(s)[i];
                worst = worst.max((fd - analytic).abs() / analytic.abs().max(1.0));
            }
        }
    }
    GradientCheck {
        suite: suite.name().to_string(),
        points,
        max_rel_error: worst,
        passed: worst <= rel_tol,
    }
}

/// Stochastic first-order oracle: exact gradients plus
/// `zeta ~ N(0, (sigma^2 / d) I)` per objective, so `E|zeta|^2 = sigma^2`.
#[derive(Debug)]
pub struct NoisyOracle<'a> {
    suite: &'a Suite,
    sigma: f64,
    rng: RngStream,
    budget: OracleBudget,
}

impl<'a> NoisyOracle<'a> {
    pub fn new(suite: &'a Suite, sigma: f64, rng: RngStream) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::invalid(format!("sigma must be >= 0, got {sigma}")));
        }
        Ok(Self {
            suite,
            sigma,
            rng,
            budget: OracleBudget::default(),
        })
    }

    /// Noise-free oracle; the stream is never advanced.
    pub fn exact(suite: &'a Suite) -> Self {
        Self {
            suite,
            sigma: 0.0,
            rng: RngStream::new(0, 0),
            budget: OracleBudget::default(),
        }
    }

    pub fn suite(&self) -> &'a Suite {
        self.suite
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn budget(&self) -> OracleBudget {
        self.budget
    }

    pub fn rng_mut(&mut self) -> &mut RngStream {
        &mut self.rng
    }

    fn row_noise_std(&self, weight_norm: f64) -> f64 {
        self.sigma * weight_norm / (self.suite.dim() as f64).sqrt()
    }

    /// One stochastic gradient per objective; charges `S` evaluations.
    pub fn noisy_gradients(&mut self, x: &[f64]) -> GradientMatrix {
        let mut grads = self.suite.gradients(x);
        self.budget.charge_per_objective(grads.n_objectives());
        if self.sigma > 0.0 {
            let std = self.row_noise_std(1.0);
            grads.set_stochastic(true);
            for row in grads.rows_mut() {
                for g in row.iter_mut() {
                    *g += std * self.rng.standard_normal();
                }
            }
        }
        grads
    }

    /// One stochastic gradient of `sum_s lambda_s f_s`; charges a single
    /// evaluation. The noise has scale `sigma |lambda|_2`, the law of the
    /// weighted sum of independent per-objective noises.
    pub fn noisy_scalarized_gradient(
        &mut self,
        x: &[f64],
        lambda: &SimplexWeights,
    ) -> Result<Vec<f64>> {
        let grads = self.suite.gradients(x);
        let mut dir = weighted_direction(&grads, lambda)?;
        self.budget.charge_scalarized();
        if self.sigma > 0.0 {
            let std = self.row_noise_std(lambda.l2_norm());
            for g in dir.iter_mut() {
                *g += std * self.rng.standard_normal();
            }
        }
        Ok(dir)
    }
}

/// Uniform draw in `[-half_width, half_width]^d`.
pub fn sample_box(rng: &mut RngStream, dim: usize, half_width: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| rng.uniform(-half_width, half_width))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::norm_sq;

    #[test]
    fn fonseca_examples() {
        for d in [1usize, 2, 5] {
            let c = 1.0 / (d as f64).sqrt();
            let v = fonseca_eval(&vec![c; d]).unwrap();
            assert!(v[0].abs() < 1e-15);
            assert!((v[1] - (1.0 - (-4.0f64).exp())).abs() < 1e-12);
            assert!((v[1] - 0.981684).abs() < 1e-6);
            let g = fonseca_grad(&vec![c; d]).unwrap();
            assert!(g.row(0).iter().all(|v| v.abs() < 1e-15));

            let v = fonseca_eval(&vec![0.0; d]).unwrap();
            assert!((v[0] - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
            assert!((v[1] - 0.632121).abs() < 1e-6);
        }
        let g = fonseca_grad(&[0.0]).unwrap();
        assert!((g.row(0)[0] + 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((g.row(1)[0] - 0.735759).abs() < 1e-6);
    }

    #[test]
    fn quadratic_examples() {
        let q = QuadraticSuite::new(vec![vec![0.0, 0.0]], vec![1.0]).unwrap();
        assert_eq!(q.values(&[1.0, 1.0]), vec![1.0]);
        assert_eq!(q.gradients(&[1.0, 1.0]).row(0), &[1.0, 1.0]);

        let half = SimplexWeights::uniform(2).unwrap();
        let q = QuadraticSuite::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![1.0, 1.0]).unwrap();
        assert_eq!(q.weighted_minimizer(&half).unwrap(), vec![0.0, 0.0]);
        let q = QuadraticSuite::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![1.0, 3.0]).unwrap();
        assert_eq!(q.weighted_minimizer(&half).unwrap(), vec![-0.5, 0.0]);

        assert!(QuadraticSuite::new(vec![vec![0.0]], vec![0.0]).is_err());
        assert!(QuadraticSuite::new(vec![vec![0.0]], vec![-1.0]).is_err());
    }

    #[test]
    fn quadratic_minimizer_zeroes_weighted_gradient() {
        let mut rng = RngStream::new(11, 0);
        let centers: Vec<Vec<f64>> = (0..3).map(|_| rng.normal_draw(4)).collect();
        let suite = Suite::quadratic(centers, vec![0.5, 1.0, 2.5]).unwrap();
        for _ in 0..50 {
            let raw: Vec<f64> = (0..3).map(|_| rng.uniform(0.0, 1.0)).collect();
            let s: f64 = raw.iter().sum();
            let lambda = SimplexWeights::new(raw.iter().map(|v| v / s).collect()).unwrap();
            let x = suite.weighted_minimizer(&lambda).unwrap();
            let g = weighted_direction(&suite.gradients(&x), &lambda).unwrap();
            assert!(norm_sq(&g).sqrt() < 1e-10);
        }
    }

    #[test]
    fn least_squares_examples() {
        let suite = LeastSquaresSuite::new(vec![vec![vec![1.0, 0.0]]], vec![vec![0.0]]).unwrap();
        assert_eq!(suite.values(&[0.0, 5.0]), vec![0.0]);
        assert_eq!(suite.gradients(&[0.0, 5.0]).row(0), &[0.0, 0.0]);

        let suite = LeastSquaresSuite::new(vec![vec![vec![1.0, 0.0]]], vec![vec![2.0]]).unwrap();
        assert_eq!(suite.values(&[3.0, 0.0]), vec![0.5]);
        assert_eq!(suite.gradients(&[3.0, 0.0]).row(0), &[1.0, 0.0]);
        assert!((suite.smoothness - 1.0).abs() < 1e-12);

        // square maps would be strongly convex
        assert!(LeastSquaresSuite::new(vec![vec![vec![1.0]]], vec![vec![0.0]]).is_err());
    }

    #[test]
    fn random_least_squares_has_common_minimizer() {
        let mut rng = RngStream::new(5, 0);
        let (suite, x_ref) = LeastSquaresSuite::random_consistent(2, 6, 3, 1.0, &mut rng).unwrap();
        assert!(suite.values(&x_ref).iter().all(|v| *v < 1e-20));
        assert!((suite.smoothness - 1.0).abs() < 1e-9);
        let x_star = suite
            .weighted_minimizer(&SimplexWeights::uniform(2).unwrap())
            .unwrap();
        let err: f64 = x_star
            .iter()
            .zip(&x_ref)
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        assert!(err.sqrt() < 1e-8, "{err}");
    }

    #[test]
    fn finite_differences_match_all_suites() {
        let mut rng = RngStream::new(3, 0);
        let centers: Vec<Vec<f64>> = (0..3).map(|_| rng.normal_draw(4)).collect();
        let (ls, _) = LeastSquaresSuite::random_consistent(2, 6, 3, 1.0, &mut rng).unwrap();
        let suites = [
            Suite::fonseca(1).unwrap(),
            Suite::fonseca(5).unwrap(),
            Suite::quadratic(centers, vec![1.0, 2.0, 0.5]).unwrap(),
            Suite::LeastSquares(ls),
        ];
        for suite in &suites {
            let check = gradient_check(suite, 100, 2.0, FD_STEP, FD_REL_TOL, &mut rng);
            assert!(check.passed, "{check:?}");
        }
    }

    #[test]
    fn zero_noise_is_exact_and_charged() {
        let suite = Suite::fonseca(3).unwrap();
        let mut oracle = NoisyOracle::new(&suite, 0.0, RngStream::new(1, 0)).unwrap();
        let x = [0.3, -0.2, 0.9];
        assert_eq!(oracle.noisy_gradients(&x), suite.gradients(&x));
        let lambda = SimplexWeights::new(vec![0.25, 0.75]).unwrap();
        let exact = weighted_direction(&suite.gradients(&x), &lambda).unwrap();
        assert_eq!(
            oracle.noisy_scalarized_gradient(&x, &lambda).unwrap(),
            exact
        );
        assert_eq!(oracle.budget().gradient_evals, 3);
        assert_eq!(oracle.budget().scalarized_evals, 1);
    }

    #[test]
    fn row_noise_has_unit_energy() {
        let suite = Suite::quadratic(vec![vec![0.0; 4]], vec![1.0]).unwrap();
        let x = [0.5, -1.0, 2.0, 0.0];
        let exact = suite.gradients(&x);
        let mut oracle = NoisyOracle::new(&suite, 1.0, RngStream::new(77, 0)).unwrap();
        let n = 100_000;
        let mut energy = 0.0;
        let mut mean = [0.0; 4];
        for _ in 0..n {
            let g = oracle.noisy_gradients(&x);
            for ((m, gi), ei) in mean.iter_mut().zip(g.row(0)).zip(exact.row(0)) {
                energy += (gi - ei) * (gi - ei);
                *m += gi;
            }
        }
        energy /= n as f64;
        assert!((energy - 1.0).abs() < 0.02, "{energy}");
        let bound = 3.0 * 1.0 / (n as f64).sqrt();
        for (m, ei) in mean.iter().zip(exact.row(0)) {
            assert!((m / n as f64 - ei).abs() < bound);
        }
    }

    #[test]
    fn scalarized_noise_scale() {
        let lambda = SimplexWeights::uniform(2).unwrap();
        assert!((lambda.l2_norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);

        let suite = Suite::quadratic(vec![vec![0.0; 2], vec![1.0; 2]], vec![1.0, 1.0]).unwrap();
        let x = [0.0, 0.0];
        let exact = weighted_direction(&suite.gradients(&x), &lambda).unwrap();
        let mut oracle = NoisyOracle::new(&suite, 1.0, RngStream::new(8, 0)).unwrap();
        let n = 100_000;
        let mut energy = 0.0;
        for _ in 0..n {
            let g = oracle.noisy_scalarized_gradient(&x, &lambda).unwrap();
            energy += g
                .iter()
                .zip(&exact)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>();
        }
        energy /= n as f64;
        assert!((energy - 0.5).abs() < 0.01, "{energy}");
        assert_eq!(oracle.budget().gradient_evals, n as u64);
    }

    #[test]
    fn unit_weight_matches_row_noise() {
        let suite = Suite::quadratic(vec![vec![0.0; 3], vec![1.0; 3]], vec![1.0, 2.0]).unwrap();
        let x = [0.1, 0.2, 0.3];
        let e1 = SimplexWeights::vertex(2, 0).unwrap();
        let mut a = NoisyOracle::new(&suite, 0.7, RngStream::new(4, 0)).unwrap();
        let mut b = NoisyOracle::new(&suite, 0.7, RngStream::new(4, 0)).unwrap();
        let scalar = a.noisy_scalarized_gradient(&x, &e1).unwrap();
        let rows = b.noisy_gradients(&x);
        assert_eq!(scalar.as_slice(), rows.row(0));
    }
}
