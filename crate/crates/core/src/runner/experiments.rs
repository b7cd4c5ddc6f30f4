//! Experiment drivers shared by the CLI and the test suites.

use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{
    default_burn_in, fit_rate, running_average, stationarity_gap, suboptimality_sc, RateFit,
};
use crate::optimizers::{
    self, MomentumSchedule, OptimizerKind, OptimizerSpec, RunOptions, StepSchedule,
};
use crate::problems::{sample_box, LeastSquaresSuite, NoisyOracle, Suite};
use crate::rng::{RngStream, INIT_STREAM, NOISE_STREAM, WEIGHTS_STREAM};
use crate::simplex_qp::{QpOptions, DEFAULT_TOL};
use crate::types::{dot, DecisionVector, SimplexWeights, Trajectory};

use super::config::{ExperimentConfig, ProblemConfig};

/// Stream for randomly generated suite parameters.
pub const SUITE_STREAM: u64 = 3;

/// Environment variable capping the number of seeds run concurrently.
pub const THREADS_ENV: &str = "PSMGD_THREADS";

pub fn build_suite(problem: &ProblemConfig) -> Result<(Suite, Option<Vec<f64>>)> {
    match problem {
        ProblemConfig::Fonseca { dim } => Ok((Suite::fonseca(*dim)?, None)),
        ProblemConfig::Quadratic {
            centers,
            scales,
            n_objectives,
            dim,
            seed,
        } => {
            let centers = match centers {
                Some(c) => c.clone(),
                None => {
                    let mut rng = RngStream::new(*seed, SUITE_STREAM);
                    (0..*n_objectives).map(|_| rng.normal_draw(*dim)).collect()
                }
            };
            let scales = scales.clone().unwrap_or_else(|| vec![1.0; *n_objectives]);
            Ok((Suite::quadratic(centers, scales)?, None))
        }
        ProblemConfig::ConvexLs {
            n_objectives,
            dim,
            rank,
            smoothness,
            seed,
        } => {
            let mut rng = RngStream::new(*seed, SUITE_STREAM);
            let (ls, x_ref) = LeastSquaresSuite::random_consistent(
                *n_objectives,
                *dim,
                *rank,
                *smoothness,
                &mut rng,
            )?;
            Ok((Suite::LeastSquares(ls), Some(x_ref)))
        }
    }
}

pub fn initial_point(cfg: &ExperimentConfig, dim: usize, seed: u64) -> Result<DecisionVector> {
    match &cfg.init.x0 {
        Some(x0) if x0.len() != dim => {
            Err(Error::config("init.x0", format!("need {dim} coordinates")))
        }
        Some(x0) => {
            DecisionVector::new(x0.clone()).map_err(|e| Error::config("init.x0", e.to_string()))
        }
        None => {
            let mut rng = RngStream::new(seed, INIT_STREAM);
            DecisionVector::new(sample_box(&mut rng, dim, cfg.init.half_width))
        }
    }
}

/// One finished (or diverged) run.
#[derive(Clone, Debug)]
pub struct SeedOutcome {
    pub seed: u64,
    pub trajectory: Trajectory,
    pub diverged_at: Option<usize>,
    /// Exact stationarity gap at the final iterate; `None` after divergence.
    pub final_gap: Option<f64>,
}

pub fn run_seed(cfg: &ExperimentConfig, suite: &Suite, seed: u64) -> Result<SeedOutcome> {
    let x0 = initial_point(cfg, suite.dim(), seed)?;
    let mut oracle = NoisyOracle::new(suite, cfg.sigma, RngStream::new(seed, NOISE_STREAM))?;
    let mut weight_rng = RngStream::new(seed, WEIGHTS_STREAM);
    let opts = RunOptions::new(cfg.horizon).with_stationarity_every(cfg.stationarity_every);
    match optimizers::run(&cfg.optimizer, &mut oracle, &mut weight_rng, &x0, &opts) {
        Ok(trajectory) => {
            let final_gap = Some(stationarity_gap(suite, &trajectory.final_x, DEFAULT_TOL)?);
            Ok(SeedOutcome {
                seed,
                trajectory,
                diverged_at: None,
                final_gap,
            })
        }
        Err(Error::Diverged { iteration, partial }) => Ok(SeedOutcome {
            seed,
            trajectory: *partial,
            diverged_at: Some(iteration),
            final_gap: None,
        }),
        Err(e) => Err(e),
    }
}

/// Worker count from `PSMGD_THREADS`, defaulting to the hardware threads.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Runs `f` once per seed, in parallel, and returns results in seed order.
pub fn map_seeds<T, F>(seeds: &[u64], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let threads = thread_count().min(seeds.len()).max(1);
    if threads == 1 {
        return seeds.iter().map(|&s| f(s)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    pool.install(|| seeds.par_iter().map(|&s| f(s)).collect())
}

pub fn run_seeds(cfg: &ExperimentConfig, suite: &Suite) -> Result<Vec<SeedOutcome>> {
    map_seeds(&cfg.seeds, |seed| run_seed(cfg, suite, seed))
}

/// Largest `|lambda_t - lambda_{t-1}|_inf` over records with `t > after`.
pub fn max_weight_jump(traj: &Trajectory, after: usize) -> f64 {
    traj.records
        .windows(2)
        .filter(|w| w[1].t > after)
        .map(|w| w[1].lambda.max_abs_diff(&w[0].lambda))
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RateFamily {
    #[serde(rename = "sc")]
    StronglyConvex,
    #[serde(rename = "gc")]
    GeneralConvex,
    #[serde(rename = "nc")]
    Nonconvex,
}

impl RateFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            RateFamily::StronglyConvex => "sc",
            RateFamily::GeneralConvex => "gc",
            RateFamily::Nonconvex => "nc",
        }
    }

    /// Slope predicted by the matching convergence bound.
    pub fn expected_slope(&self) -> f64 {
        match self {
            RateFamily::StronglyConvex => -1.0,
            RateFamily::GeneralConvex | RateFamily::Nonconvex => -0.5,
        }
    }

    pub fn default_horizons(&self) -> Vec<usize> {
        match self {
            RateFamily::StronglyConvex => vec![200, 800, 3200, 12800],
            RateFamily::GeneralConvex | RateFamily::Nonconvex => vec![5000, 10000, 20000],
        }
    }
}

impl FromStr for RateFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sc" => Ok(RateFamily::StronglyConvex),
            "gc" => Ok(RateFamily::GeneralConvex),
            "nc" => Ok(RateFamily::Nonconvex),
            other => Err(Error::invalid(format!("unknown rate family `{other}`"))),
        }
    }
}

pub const RATE_SIGMA: f64 = 0.5;
pub const RATE_PERIOD: usize = 8;
/// `c` in the `eta = c / T` schedule of the strongly convex family.
pub const SC_STEP_C: f64 = 2.0;
/// Shared minimizer of both strongly convex objectives; also the start point.
pub const SC_CENTER: [f64; 5] = [0.5, -0.3, 0.2, 0.0, 0.1];
pub const SC_SCALES: [f64; 2] = [1.0, 2.0];
pub const NC_ETA0: f64 = 0.2;
pub const NC_DIM: usize = 5;
pub const GC_DIM: usize = 6;
pub const GC_RANK: usize = 3;
pub const GC_SUITE_SEED: u64 = 12345;

/// Averaged rate metric and its log-log fit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateReport {
    pub family: RateFamily,
    pub horizons: Vec<usize>,
    pub seeds: Vec<u64>,
    /// `(T, metric)` for `sc`; `(t, running average)` for `gc` and `nc`.
    pub series: Vec<(f64, f64)>,
    pub burn_in: f64,
    pub fit: RateFit,
}

pub fn sc_suite() -> Result<Suite> {
    Suite::quadratic(
        vec![SC_CENTER.to_vec(), SC_CENTER.to_vec()],
        SC_SCALES.to_vec(),
    )
}

pub fn gc_suite() -> Result<(Suite, Vec<f64>)> {
    let mut rng = RngStream::new(GC_SUITE_SEED, SUITE_STREAM);
    let (ls, x_ref) = LeastSquaresSuite::random_consistent(2, GC_DIM, GC_RANK, 1.0, &mut rng)?;
    Ok((Suite::LeastSquares(ls), x_ref))
}

/// Runs the prescribed suite and schedule of `family` and fits the decay.
///
/// `sc` runs every horizon and fits the final suboptimality against `T`.
/// `gc` and `nc` run once at the largest horizon and fit the running average
/// against `t` past a 10% burn-in.
pub fn rate_experiment(
    family: RateFamily,
    horizons: &[usize],
    seeds: &[u64],
) -> Result<RateReport> {
    if horizons.len() < 3 || horizons.windows(2).any(|w| w[0] >= w[1]) || horizons[0] == 0 {
        return Err(Error::config(
            "rates.horizons",
            "need at least 3 increasing positive horizons",
        ));
    }
    super::config::check_seeds(seeds)?;
    let n = seeds.len() as f64;
    let qp = QpOptions::default();
    let (series, burn_in) = match family {
        RateFamily::StronglyConvex => {
            let suite = sc_suite()?;
            let x0 = DecisionVector::new(SC_CENTER.to_vec())?;
            let momentum = MomentumSchedule::fixed(optimizers::DEFAULT_MOMENTUM)?;
            let mut series = Vec::with_capacity(horizons.len());
            for &horizon in horizons {
                let step = StepSchedule::constant_over_horizon(SC_STEP_C, horizon)?;
                let metrics = map_seeds(seeds, |seed| {
                    let mut oracle =
                        NoisyOracle::new(&suite, RATE_SIGMA, RngStream::new(seed, NOISE_STREAM))?;
                    let opts = RunOptions::new(horizon).with_stationarity_every(0);
                    let traj = optimizers::psmgd_run(
                        &mut oracle,
                        RATE_PERIOD,
                        &step,
                        &momentum,
                        &qp,
                        &x0,
                        &opts,
                    )?;
                    let lambda = traj.final_lambda().expect("non-empty trajectory");
                    suboptimality_sc(&suite, &traj.final_x, lambda)
                })?;
                series.push((horizon as f64, metrics.iter().sum::<f64>() / n));
            }
            (series, 0.0)
        }
        RateFamily::GeneralConvex | RateFamily::Nonconvex => {
            let horizon = *horizons.last().expect("checked non-empty");
            let convex = family == RateFamily::GeneralConvex;
            let (suite, x_ref) = if convex {
                let (suite, x_ref) = gc_suite()?;
                (suite, Some(x_ref))
            } else {
                (Suite::fonseca(NC_DIM)?, None)
            };
            let (step, momentum) = if convex {
                (
                    StepSchedule::inverse_sqrt(1.0)?,
                    MomentumSchedule::EtaCoupled,
                )
            } else {
                (
                    StepSchedule::inverse_sqrt(NC_ETA0)?,
                    MomentumSchedule::nonconvex_adaptive(),
                )
            };
            // nc starts at the minimizer of f_1, one end of the Pareto segment
            let x0_of = |seed| {
                if convex {
                    sample_box(&mut RngStream::new(seed, INIT_STREAM), GC_DIM, 1.0)
                } else {
                    vec![1.0 / (NC_DIM as f64).sqrt(); NC_DIM]
                }
            };
            let curves = map_seeds(seeds, |seed| {
                let mut oracle =
                    NoisyOracle::new(&suite, RATE_SIGMA, RngStream::new(seed, NOISE_STREAM))?;
                let x0 = DecisionVector::new(x0_of(seed))?;
                let opts = RunOptions::new(horizon).with_stationarity_every(0);
                let traj = optimizers::psmgd_run(
                    &mut oracle,
                    RATE_PERIOD,
                    &step,
                    &momentum,
                    &qp,
                    &x0,
                    &opts,
                )?;
                let raw: Vec<f64> = match &x_ref {
                    Some(x_ref) => {
                        let ref_losses = suite.values(x_ref);
                        traj.records
                            .iter()
                            .map(|r| {
                                dot(r.lambda.as_slice(), &r.losses)
                                    - dot(r.lambda.as_slice(), &ref_losses)
                            })
                            .collect()
                    }
                    None => traj
                        .records
                        .iter()
                        .map(|r| r.weighted_grad_norm_sq)
                        .collect(),
                };
                Ok(running_average(&raw))
            })?;
            let mut avg = vec![0.0; horizon];
            for curve in &curves {
                for (a, v) in avg.iter_mut().zip(curve) {
                    *a += v / n;
                }
            }
            let series = avg
                .into_iter()
                .enumerate()
                .map(|(i, v)| ((i + 1) as f64, v))
                .collect();
            (series, default_burn_in(horizon))
        }
    };
    let fit = fit_rate(&series, burn_in)?;
    Ok(RateReport {
        family,
        horizons: horizons.to_vec(),
        seeds: seeds.to_vec(),
        series,
        burn_in,
        fit,
    })
}

/// Fonseca multi-start protocol of the Pareto front figure.
pub const FRONT_DIM: usize = 5;
pub const FRONT_PERIOD: usize = 4;
pub const FRONT_STEP: f64 = 0.05;
pub const FRONT_HORIZON: usize = 500_000;
pub const FRONT_INIT_BOX: f64 = 2.0;

/// Final state of one multi-start run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrontPoint {
    pub seed: u64,
    pub final_x: Vec<f64>,
    pub final_losses: Vec<f64>,
    pub stationarity_gap: f64,
    /// `max |lambda_t - lambda_{t-1}|_inf` over `t > 20`.
    pub max_weight_jump: f64,
}

/// Spec for `kind` under the front protocol.
pub fn front_spec(kind: OptimizerKind) -> Result<OptimizerSpec> {
    let step = StepSchedule::constant(FRONT_STEP)?;
    Ok(match kind {
        OptimizerKind::Psmgd => OptimizerSpec::psmgd(
            FRONT_PERIOD,
            step,
            MomentumSchedule::fixed(optimizers::DEFAULT_MOMENTUM)?,
        )?,
        OptimizerKind::Smg => OptimizerSpec::smg(step),
        OptimizerKind::Mgda => OptimizerSpec::mgda(step),
        OptimizerKind::RandomWeights => OptimizerSpec::random_weights(step),
        OptimizerKind::LinearScalarization => {
            OptimizerSpec::linear_scalarization(SimplexWeights::uniform(2)?, step)
        }
    })
}

/// Deterministic Fonseca runs of `spec` from a uniform start in the init box, one per seed.
pub fn pareto_front(
    spec: &OptimizerSpec,
    horizon: usize,
    seeds: &[u64],
) -> Result<Vec<FrontPoint>> {
    let suite = Suite::fonseca(FRONT_DIM)?;
    map_seeds(seeds, |seed| {
        let x0 = DecisionVector::new(sample_box(
            &mut RngStream::new(seed, INIT_STREAM),
            FRONT_DIM,
            FRONT_INIT_BOX,
        ))?;
        let mut oracle = NoisyOracle::new(&suite, 0.0, RngStream::new(seed, NOISE_STREAM))?;
        let mut weight_rng = RngStream::new(seed, WEIGHTS_STREAM);
        let opts = RunOptions::new(horizon).with_stationarity_every(0);
        let traj = optimizers::run(spec, &mut oracle, &mut weight_rng, &x0, &opts)?;
        Ok(FrontPoint {
            seed,
            stationarity_gap: stationarity_gap(&suite, &traj.final_x, DEFAULT_TOL)?,
            max_weight_jump: max_weight_jump(&traj, 20),
            final_losses: traj.final_losses,
            final_x: traj.final_x,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::config::ConfigMap;

    #[test]
    fn family_round_trip() {
        for f in [
            RateFamily::StronglyConvex,
            RateFamily::GeneralConvex,
            RateFamily::Nonconvex,
        ] {
            assert_eq!(f.as_str().parse::<RateFamily>().unwrap(), f);
        }
        assert!("xx".parse::<RateFamily>().is_err());
    }

    #[test]
    fn run_seed_is_deterministic() {
        let map = ConfigMap::parse("optimizer.R = 4\nT = 30\nsigma = 0.3\nseeds = 4,5").unwrap();
        let cfg = ExperimentConfig::from_map(&map).unwrap();
        let (suite, _) = build_suite(&cfg.problem).unwrap();
        let a = run_seeds(&cfg, &suite).unwrap();
        let b = run_seeds(&cfg, &suite).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a[0].trajectory, b[0].trajectory);
        assert_ne!(a[0].trajectory.final_x, a[1].trajectory.final_x);
        assert_eq!(a[0].trajectory.budget.total_bp(), 8 * 2 + 22);
    }

    #[test]
    fn divergence_is_captured() {
        let map = ConfigMap::parse("problem.kind = quadratic\noptimizer.step.value = 10\nT = 400")
            .unwrap();
        let cfg = ExperimentConfig::from_map(&map).unwrap();
        let (suite, _) = build_suite(&cfg.problem).unwrap();
        let out = run_seed(&cfg, &suite, 0).unwrap();
        assert!(out.diverged_at.is_some());
        assert!(out.final_gap.is_none());
    }

    #[test]
    fn rate_fit_on_short_horizons() {
        let report = rate_experiment(RateFamily::StronglyConvex, &[50, 100, 200], &[0, 1]).unwrap();
        assert_eq!(report.series.len(), 3);
        assert!(rate_experiment(RateFamily::StronglyConvex, &[100, 50, 200], &[0]).is_err());
    }
}
