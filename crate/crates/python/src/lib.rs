//! Python module `psmgd_py`: suites, the min-norm solver, the optimizers and
//! the evaluation metrics.

use pyo3::exceptions::{PyNotImplementedError, PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use psmgd::metrics::{self, MethodResultTable, TaskDirection};
use psmgd::optimizers::{
    self, MomentumSchedule, OptimizerKind, OptimizerSpec, RunOptions, StepSchedule,
};
use psmgd::problems::{LeastSquaresSuite, NoisyOracle, Suite};
use psmgd::rng::{NOISE_STREAM, WEIGHTS_STREAM};
use psmgd::runner::experiments::{self, RateFamily};
use psmgd::{DecisionVector, Error, GradientMatrix, RngStream, SimplexWeights};

pyo3::create_exception!(psmgd_py, DivergedError, PyRuntimeError);

pub fn to_py_err(err: Error) -> PyErr {
    match err {
        Error::InvalidArgument(_) | Error::Config { .. } => PyValueError::new_err(err.to_string()),
        Error::Unsupported(_) => PyNotImplementedError::new_err(err.to_string()),
        Error::Io { .. } => PyOSError::new_err(err.to_string()),
        Error::Diverged { iteration, .. } => {
            DivergedError::new_err(format!("run diverged at iteration {iteration}"))
        }
    }
}

fn grads(rows: Vec<Vec<f64>>) -> PyResult<GradientMatrix> {
    GradientMatrix::new(rows, false).map_err(to_py_err)
}

fn rows_of(g: &GradientMatrix) -> Vec<Vec<f64>> {
    g.rows().map(<[f64]>::to_vec).collect()
}

#[pyclass(name = "Suite", frozen, skip_from_py_object, module = "psmgd_py")]
pub struct PySuite {
    pub inner: Suite,
}

#[pymethods]
impl PySuite {
    #[staticmethod]
    fn fonseca(dim: usize) -> PyResult<Self> {
        Ok(Self {
            inner: Suite::fonseca(dim).map_err(to_py_err)?,
        })
    }

    /// `f_s(x) = (a_s / 2) |x - c_s|^2`.
    #[staticmethod]
    fn quadratic(centers: Vec<Vec<f64>>, scales: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: Suite::quadratic(centers, scales).map_err(to_py_err)?,
        })
    }

    /// `f_s(x) = 1/2 |P_s x - b_s|^2`; `maps[s]` is a list of rows.
    #[staticmethod]
    fn least_squares(maps: Vec<Vec<Vec<f64>>>, targets: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self {
            inner: Suite::least_squares(maps, targets).map_err(to_py_err)?,
        })
    }

    /// Random consistent least squares suite and its common minimizer.
    #[staticmethod]
    #[pyo3(signature = (n_objectives, dim, rank, smoothness=1.0, seed=0))]
    fn random_least_squares(
        n_objectives: usize,
        dim: usize,
        rank: usize,
        smoothness: f64,
        seed: u64,
    ) -> PyResult<(Self, Vec<f64>)> {
        let mut rng = RngStream::new(seed, experiments::SUITE_STREAM);
        let (ls, x_ref) =
            LeastSquaresSuite::random_consistent(n_objectives, dim, rank, smoothness, &mut rng)
                .map_err(to_py_err)?;
        Ok((
            Self {
                inner: Suite::LeastSquares(ls),
            },
            x_ref,
        ))
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    #[getter]
    fn n_objectives(&self) -> usize {
        self.inner.n_objectives()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// `(L, mu)`.
    #[getter]
    fn constants(&self) -> (f64, f64) {
        let c = self.inner.constants();
        (c.smoothness, c.strong_convexity)
    }

    fn values(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check_dim(&x)?;
        Ok(self.inner.values(&x))
    }

    fn gradients(&self, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        self.check_dim(&x)?;
        Ok(rows_of(&self.inner.gradients(&x)))
    }

    fn __repr__(&self) -> String {
        format!(
            "Suite({}, S={}, d={})",
            self.inner.name(),
            self.inner.n_objectives(),
            self.inner.dim()
        )
    }
}

impl PySuite {
    fn check_dim(&self, x: &[f64]) -> PyResult<()> {
        if x.len() != self.inner.dim() {
            return Err(PyValueError::new_err(format!(
                "expected {} coordinates, got {}",
                self.inner.dim(),
                x.len()
            )));
        }
        Ok(())
    }
}

#[pyclass(name = "QpSolution", frozen, get_all, module = "psmgd_py")]
pub struct PyQpSolution {
    pub weights: Vec<f64>,
    pub min_norm_sq: f64,
    pub iterations_used: usize,
    pub converged: bool,
}

#[pyfunction]
#[pyo3(signature = (gradients, tol=psmgd::simplex_qp::DEFAULT_TOL, max_iters=psmgd::simplex_qp::DEFAULT_MAX_ITERS))]
pub fn min_norm_point(
    gradients: Vec<Vec<f64>>,
    tol: f64,
    max_iters: usize,
) -> PyResult<PyQpSolution> {
    let sol = psmgd::min_norm_point(&grads(gradients)?, tol, max_iters).map_err(to_py_err)?;
    Ok(PyQpSolution {
        weights: sol.lambda.into_inner(),
        min_norm_sq: sol.min_norm_sq,
        iterations_used: sol.iterations_used,
        converged: sol.converged,
    })
}

#[pyfunction]
pub fn project_simplex(v: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(psmgd::project_simplex(&v).map_err(to_py_err)?.into_inner())
}

#[pyfunction]
pub fn two_vector_gamma(g1: Vec<f64>, g2: Vec<f64>) -> PyResult<f64> {
    if g1.len() != g2.len() {
        return Err(PyValueError::new_err("vectors differ in length"));
    }
    Ok(psmgd::two_vector_gamma(&g1, &g2))
}

#[pyclass(name = "Trajectory", frozen, get_all, module = "psmgd_py")]
pub struct PyTrajectory {
    pub t: Vec<usize>,
    pub eta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub weights: Vec<Vec<f64>>,
    pub losses: Vec<Vec<f64>>,
    pub grad_norm_sq: Vec<f64>,
    pub stationarity_gap: Vec<Option<f64>>,
    pub bp_cumulative: Vec<u64>,
    pub final_x: Vec<f64>,
    pub final_losses: Vec<f64>,
    pub gradient_evals: u64,
}

#[pymethods]
impl PyTrajectory {
    fn __len__(&self) -> usize {
        self.t.len()
    }
}

impl From<psmgd::Trajectory> for PyTrajectory {
    fn from(tr: psmgd::Trajectory) -> Self {
        Self {
            t: tr.records.iter().map(|r| r.t).collect(),
            eta: tr.records.iter().map(|r| r.eta).collect(),
            alpha: tr.records.iter().map(|r| r.alpha).collect(),
            weights: tr
                .records
                .iter()
                .map(|r| r.lambda.as_slice().to_vec())
                .collect(),
            losses: tr.records.iter().map(|r| r.losses.clone()).collect(),
            grad_norm_sq: tr.records.iter().map(|r| r.weighted_grad_norm_sq).collect(),
            stationarity_gap: tr.records.iter().map(|r| r.stationarity_gap).collect(),
            bp_cumulative: tr.records.iter().map(|r| r.bp_cumulative).collect(),
            gradient_evals: tr.budget.gradient_evals,
            final_x: tr.final_x,
            final_losses: tr.final_losses,
        }
    }
}

fn parse_kind(kind: &str) -> PyResult<OptimizerKind> {
    kind.parse().map_err(to_py_err)
}

fn step_schedule(kind: &str, value: f64, horizon: usize) -> PyResult<StepSchedule> {
    match kind {
        "constant" => StepSchedule::constant(value),
        "constant_over_horizon" => StepSchedule::constant_over_horizon(value, horizon),
        "inverse_sqrt" => StepSchedule::inverse_sqrt(value),
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown step schedule `{other}`"
            )))
        }
    }
    .map_err(to_py_err)
}

fn momentum_schedule(kind: &str, alpha: f64) -> PyResult<MomentumSchedule> {
    match kind {
        "fixed" => MomentumSchedule::fixed(alpha).map_err(to_py_err),
        "eta_coupled" => Ok(MomentumSchedule::EtaCoupled),
        "nonconvex_adaptive" => Ok(MomentumSchedule::nonconvex_adaptive()),
        other => Err(PyValueError::new_err(format!(
            "unknown momentum schedule `{other}`"
        ))),
    }
}

/// Runs one optimizer. Noise and random weights come from `seed`.
#[pyfunction]
#[pyo3(signature = (
    suite, kind, x0, horizon, sigma=0.0, seed=0, period=optimizers::DEFAULT_PERIOD,
    step="constant", step_value=0.1, momentum="fixed", alpha=optimizers::DEFAULT_MOMENTUM,
    weights=None, stationarity_every=10
))]
#[allow(clippy::too_many_arguments)]
pub fn run(
    py: Python<'_>,
    suite: &PySuite,
    kind: &str,
    x0: Vec<f64>,
    horizon: usize,
    sigma: f64,
    seed: u64,
    period: usize,
    step: &str,
    step_value: f64,
    momentum: &str,
    alpha: f64,
    weights: Option<Vec<f64>>,
    stationarity_every: usize,
) -> PyResult<PyTrajectory> {
    let kind = parse_kind(kind)?;
    let step = step_schedule(step, step_value, horizon)?;
    let s = suite.inner.n_objectives();
    let fixed_weights = match (weights, kind) {
        (Some(w), _) => Some(SimplexWeights::new(w).map_err(to_py_err)?),
        (None, OptimizerKind::LinearScalarization) => {
            Some(SimplexWeights::uniform(s).map_err(to_py_err)?)
        }
        (None, _) => None,
    };
    let spec = OptimizerSpec {
        kind,
        period,
        fixed_weights,
        step,
        momentum: momentum_schedule(momentum, alpha)?,
        qp: Default::default(),
    }
    .validated()
    .map_err(to_py_err)?;
    let x0 = DecisionVector::new(x0).map_err(to_py_err)?;
    let opts = RunOptions::new(horizon).with_stationarity_every(stationarity_every);
    let suite = &suite.inner;
    let traj = py.detach(|| {
        let mut oracle = NoisyOracle::new(suite, sigma, RngStream::new(seed, NOISE_STREAM))?;
        optimizers::run(
            &spec,
            &mut oracle,
            &mut RngStream::new(seed, WEIGHTS_STREAM),
            &x0,
            &opts,
        )
    });
    Ok(traj.map_err(to_py_err)?.into())
}

#[pyfunction]
#[pyo3(signature = (suite, x, tol=psmgd::simplex_qp::DEFAULT_TOL))]
pub fn stationarity_gap(suite: &PySuite, x: Vec<f64>, tol: f64) -> PyResult<f64> {
    suite.check_dim(&x)?;
    metrics::stationarity_gap(&suite.inner, &x, tol).map_err(to_py_err)
}

#[pyfunction]
pub fn bp_count(horizon: u64, n_objectives: u64, period: u64, kind: &str) -> PyResult<u64> {
    if n_objectives == 0 || period == 0 {
        return Err(PyValueError::new_err("S and R must be >= 1"));
    }
    Ok(metrics::bp_count(
        horizon,
        n_objectives,
        period,
        parse_kind(kind)?,
    ))
}

#[pyfunction]
pub fn bp_ratio(n_objectives: u64, period: u64) -> PyResult<f64> {
    if n_objectives == 0 || period == 0 {
        return Err(PyValueError::new_err("S and R must be >= 1"));
    }
    Ok(metrics::bp_ratio(n_objectives, period))
}

fn result_table(
    methods: Vec<String>,
    values: Vec<Vec<f64>>,
    higher_better: Vec<bool>,
    baseline: &str,
) -> PyResult<MethodResultTable> {
    let tasks = (0..higher_better.len())
        .map(|n| format!("task_{n}"))
        .collect();
    let directions = higher_better
        .into_iter()
        .map(|h| {
            if h {
                TaskDirection::HigherBetter
            } else {
                TaskDirection::LowerBetter
            }
        })
        .collect();
    MethodResultTable::new(methods, tasks, values, directions, baseline).map_err(to_py_err)
}

/// Δm% of every method against `baseline`; `values[m][n]`.
#[pyfunction]
pub fn delta_m_percent(
    methods: Vec<String>,
    values: Vec<Vec<f64>>,
    higher_better: Vec<bool>,
    baseline: &str,
) -> PyResult<Vec<(String, f64)>> {
    let table = result_table(methods, values, higher_better, baseline)?;
    table
        .methods
        .iter()
        .map(|m| {
            Ok((
                m.clone(),
                metrics::delta_m_percent(&table, m).map_err(to_py_err)?,
            ))
        })
        .collect()
}

#[pyfunction]
pub fn mean_rank(
    methods: Vec<String>,
    values: Vec<Vec<f64>>,
    higher_better: Vec<bool>,
    baseline: &str,
) -> PyResult<Vec<(String, f64)>> {
    metrics::mean_rank(&result_table(methods, values, higher_better, baseline)?).map_err(to_py_err)
}

/// `(slope, intercept, r_squared, points_used)` of `ln y` on `ln t`.
#[pyfunction]
#[pyo3(signature = (series, burn_in=0.0))]
pub fn fit_rate(series: Vec<(f64, f64)>, burn_in: f64) -> PyResult<(f64, f64, f64, usize)> {
    let f = metrics::fit_rate(&series, burn_in).map_err(to_py_err)?;
    Ok((f.slope, f.intercept, f.r_squared, f.points_used))
}

#[pyfunction]
pub fn running_average(values: Vec<f64>) -> Vec<f64> {
    metrics::running_average(&values)
}

#[pyclass(name = "RateReport", frozen, get_all, module = "psmgd_py")]
pub struct PyRateReport {
    pub family: String,
    pub series: Vec<(f64, f64)>,
    pub burn_in: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Convergence rate experiment for `family` in {"sc", "gc", "nc"}.
#[pyfunction]
pub fn rate_experiment(
    py: Python<'_>,
    family: &str,
    horizons: Vec<usize>,
    seeds: Vec<u64>,
) -> PyResult<PyRateReport> {
    let family: RateFamily = family.parse().map_err(to_py_err)?;
    let r = py
        .detach(|| experiments::rate_experiment(family, &horizons, &seeds))
        .map_err(to_py_err)?;
    Ok(PyRateReport {
        family: family.as_str().to_string(),
        series: r.series,
        burn_in: r.burn_in,
        slope: r.fit.slope,
        intercept: r.fit.intercept,
        r_squared: r.fit.r_squared,
    })
}

#[pymodule]
fn psmgd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySuite>()?;
    m.add_class::<PyQpSolution>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyRateReport>()?;
    m.add("DivergedError", m.py().get_type::<DivergedError>())?;
    m.add_function(wrap_pyfunction!(min_norm_point, m)?)?;
    m.add_function(wrap_pyfunction!(project_simplex, m)?)?;
    m.add_function(wrap_pyfunction!(two_vector_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(stationarity_gap, m)?)?;
    m.add_function(wrap_pyfunction!(bp_count, m)?)?;
    m.add_function(wrap_pyfunction!(bp_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(delta_m_percent, m)?)?;
    m.add_function(wrap_pyfunction!(mean_rank, m)?)?;
    m.add_function(wrap_pyfunction!(fit_rate, m)?)?;
    m.add_function(wrap_pyfunction!(running_average, m)?)?;
    m.add_function(wrap_pyfunction!(rate_experiment, m)?)?;
    Ok(())
}
