use crate::error::{Error, Result};
use crate::problems::{NoisyOracle, Suite};
use crate::rng::RngStream;
use crate::simplex_qp::{min_norm_point_with, project_simplex, QpOptions};
use crate::types::{
    norm_sq, weighted_direction, DecisionVector, GradientMatrix, SimplexWeights, Trajectory,
    TrajectoryRecord,
};

use super::schedule::{MomentumContext, MomentumSchedule, StepSchedule};
use super::{mix_weights, OptimizerKind, OptimizerSpec};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    /// Horizon `T`.
    pub horizon: usize,
    /// Exact stationarity gap is logged every this many iterations; 0 disables.
    pub stationarity_every: usize,
    /// Solver settings for the stationarity diagnostic.
    pub diagnostic_qp: QpOptions,
}

impl RunOptions {
    pub fn new(horizon: usize) -> Self {
        Self {
            horizon,
            stationarity_every: 0,
            diagnostic_qp: QpOptions::default(),
        }
    }

    pub fn with_stationarity_every(mut self, every: usize) -> Self {
        self.stationarity_every = every;
        self
    }
}

/// What one iteration decided: the weights in force, the momentum used and
/// the update direction.
struct Step {
    lambda: SimplexWeights,
    alpha: f64,
    direction: Vec<f64>,
}

enum StepFailure {
    NonFinite,
    Fatal(Error),
}

impl From<Error> for StepFailure {
    fn from(e: Error) -> Self {
        StepFailure::Fatal(e)
    }
}

trait WeightPolicy {
    fn step(
        &mut self,
        t: usize,
        eta: f64,
        x: &[f64],
        oracle: &mut NoisyOracle<'_>,
    ) -> Result<Step, StepFailure>;
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn fresh_weights(grads: &GradientMatrix, qp: &QpOptions) -> Result<SimplexWeights, StepFailure> {
    if !grads.rows().all(all_finite) {
        return Err(StepFailure::NonFinite);
    }
    Ok(min_norm_point_with(grads, qp)?.lambda)
}

struct Periodic {
    period: usize,
    momentum: MomentumSchedule,
    eta_0: f64,
    qp: QpOptions,
    lambda: Option<SimplexWeights>,
}

impl WeightPolicy for Periodic {
    fn step(
        &mut self,
        t: usize,
        eta: f64,
        x: &[f64],
        oracle: &mut NoisyOracle<'_>,
    ) -> Result<Step, StepFailure> {
        match &self.lambda {
            Some(current) if !t.is_multiple_of(self.period) => {
                let lambda = current.clone();
                let direction = oracle.noisy_scalarized_gradient(x, &lambda)?;
                Ok(Step {
                    lambda,
                    alpha: 0.0,
                    direction,
                })
            }
            anchor => {
                let grads = oracle.noisy_gradients(x);
                let fresh = fresh_weights(&grads, &self.qp)?;
                let (lambda, alpha) = match anchor {
                    None => (fresh, 0.0),
                    Some(anchor) => {
                        let alpha = self.momentum.alpha_at(&MomentumContext {
                            t,
                            eta_t: eta,
                            eta_0: self.eta_0,
                            weight_delta_max: fresh.max_abs_diff(anchor),
                        });
                        (mix_weights(anchor, &fresh, alpha)?, alpha)
                    }
                };
                let direction = weighted_direction(&grads, &lambda)?;
                self.lambda = Some(lambda.clone());
                Ok(Step {
                    lambda,
                    alpha,
                    direction,
                })
            }
        }
    }
}

/// Fresh min-norm weights at every iteration, no momentum.
struct EveryStep {
    qp: QpOptions,
}

impl WeightPolicy for EveryStep {
    fn step(
        &mut self,
        _t: usize,
        _eta: f64,
        x: &[f64],
        oracle: &mut NoisyOracle<'_>,
    ) -> Result<Step, StepFailure> {
        let grads = oracle.noisy_gradients(x);
        let lambda = fresh_weights(&grads, &self.qp)?;
        let direction = weighted_direction(&grads, &lambda)?;
        Ok(Step {
            lambda,
            alpha: 0.0,
            direction,
        })
    }
}

struct Fixed {
    lambda: SimplexWeights,
}

impl WeightPolicy for Fixed {
    fn step(
        &mut self,
        _t: usize,
        _eta: f64,
        x: &[f64],
        oracle: &mut NoisyOracle<'_>,
    ) -> Result<Step, StepFailure> {
        let direction = oracle.noisy_scalarized_gradient(x, &self.lambda)?;
        Ok(Step {
            lambda: self.lambda.clone(),
            alpha: 0.0,
            direction,
        })
    }
}

fn drive(
    policy: &mut dyn WeightPolicy,
    oracle: &mut NoisyOracle<'_>,
    step: &StepSchedule,
    x0: &DecisionVector,
    opts: &RunOptions,
) -> Result<Trajectory> {
    let suite = oracle.suite();
    check_inputs(suite, x0, opts)?;
    let mut x = x0.as_slice().to_vec();
    let mut traj = Trajectory {
        records: Vec::with_capacity(opts.horizon),
        ..Trajectory::default()
    };

    for t in 0..opts.horizon {
        let eta = step.eta_at(t);
        let out = match policy.step(t, eta, &x, oracle) {
            Ok(out) => out,
            Err(StepFailure::NonFinite) => return Err(diverged(t, traj, x, suite, oracle)),
            Err(StepFailure::Fatal(e)) => return Err(e),
        };

        let exact = suite.gradients(&x);
        let weighted = weighted_direction(&exact, &out.lambda)?;
        let stationarity_gap = if opts.stationarity_every > 0 && t % opts.stationarity_every == 0 {
            Some(min_norm_point_with(&exact, &opts.diagnostic_qp)?.min_norm_sq)
        } else {
            None
        };
        traj.records.push(TrajectoryRecord {
            t,
            eta,
            alpha: out.alpha,
            lambda: out.lambda,
            losses: suite.values(&x),
            weighted_grad_norm_sq: norm_sq(&weighted),
            stationarity_gap,
            bp_cumulative: oracle.budget().total_bp(),
        });

        let next: Vec<f64> = x
            .iter()
            .zip(&out.direction)
            .map(|(xi, di)| xi - eta * di)
            .collect();
        if !all_finite(&next) {
            return Err(diverged(t, traj, x, suite, oracle));
        }
        x = next;
    }

    traj.final_losses = suite.values(&x);
    traj.final_x = x;
    traj.budget = oracle.budget();
    Ok(traj)
}

fn diverged(
    t: usize,
    mut traj: Trajectory,
    x: Vec<f64>,
    suite: &Suite,
    oracle: &NoisyOracle<'_>,
) -> Error {
    traj.final_losses = suite.values(&x);
    traj.final_x = x;
    traj.budget = oracle.budget();
    Error::Diverged {
        iteration: t,
        partial: Box::new(traj),
    }
}

fn check_inputs(suite: &Suite, x0: &DecisionVector, opts: &RunOptions) -> Result<()> {
    if opts.horizon == 0 {
        return Err(Error::invalid("horizon T must be >= 1"));
    }
    if x0.dim() != suite.dim() {
        return Err(Error::invalid(format!(
            "x0 has dimension {} but the suite has d={}",
            x0.dim(),
            suite.dim()
        )));
    }
    Ok(())
}

/// Periodic stochastic multi-gradient descent.
///
/// Every `period` iterations the weights are recomputed from one fresh
/// stochastic gradient matrix and mixed with the previous recompute; the
/// update at those iterations reuses the same sampled gradients. All other
/// iterations keep the weights and pay for a single scalarized gradient.
pub fn psmgd_run(
    oracle: &mut NoisyOracle<'_>,
    period: usize,
    step: &StepSchedule,
    momentum: &MomentumSchedule,
    qp: &QpOptions,
    x0: &DecisionVector,
    opts: &RunOptions,
) -> Result<Trajectory> {
    if period == 0 {
        return Err(Error::invalid("period R must be >= 1"));
    }
    let mut policy = Periodic {
        period,
        momentum: *momentum,
        eta_0: step.initial(),
        qp: *qp,
        lambda: None,
    };
    drive(&mut policy, oracle, step, x0, opts)
}

/// Stochastic multi-gradient: fresh weights from `S` stochastic gradients at
/// every iteration.
pub fn smg_run(
    oracle: &mut NoisyOracle<'_>,
    step: &StepSchedule,
    qp: &QpOptions,
    x0: &DecisionVector,
    opts: &RunOptions,
) -> Result<Trajectory> {
    drive(&mut EveryStep { qp: *qp }, oracle, step, x0, opts)
}

/// Deterministic MGDA with exact gradients.
pub fn mgda_run(
    suite: &Suite,
    step: &StepSchedule,
    qp: &QpOptions,
    x0: &DecisionVector,
    opts: &RunOptions,
) -> Result<Trajectory> {
    let mut oracle = NoisyOracle::exact(suite);
    drive(&mut EveryStep { qp: *qp }, &mut oracle, step, x0, opts)
}

/// Gradient descent on a fixed weighted sum.
pub fn ls_run(
    oracle: &mut NoisyOracle<'_>,
    fixed_weights: &SimplexWeights,
    step: &StepSchedule,
    x0: &DecisionVector,
    opts: &RunOptions,
) -> Result<Trajectory> {
    if fixed_weights.len() != oracle.suite().n_objectives() {
        return Err(Error::invalid(
            "fixed weights length does not match the suite",
        ));
    }
    let mut policy = Fixed {
        lambda: fixed_weights.clone(),
    };
    drive(&mut policy, oracle, step, x0, opts)
}

/// Softmax of `S` standard normals.
pub fn sample_random_weights(n_objectives: usize, rng: &mut RngStream) -> Result<SimplexWeights> {
    let z = rng.normal_draw(n_objectives);
    let top = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - top).exp()).collect();
    let total: f64 = e.iter().sum();
    project_simplex(&e.iter().map(|v| v / total).collect::<Vec<_>>())
}

/// Linear scalarization with weights drawn once at the start.
pub fn random_weights_run(
    oracle: &mut NoisyOracle<'_>,
    weight_rng: &mut RngStream,
    step: &StepSchedule,
    x0: &DecisionVector,
    opts: &RunOptions,
) -> Result<Trajectory> {
    let lambda = sample_random_weights(oracle.suite().n_objectives(), weight_rng)?;
    ls_run(oracle, &lambda, step, x0, opts)
}

/// Dispatches on `spec.kind`. `weight_rng` is only used by random weights.
/// MGDA ignores the oracle's noise and reads exact gradients.
pub fn run(
    spec: &OptimizerSpec,
    oracle: &mut NoisyOracle<'_>,
    weight_rng: &mut RngStream,
    x0: &DecisionVector,
    opts: &RunOptions,
) -> Result<Trajectory> {
    match spec.kind {
        OptimizerKind::Psmgd => psmgd_run(
            oracle,
            spec.period,
            &spec.step,
            &spec.momentum,
            &spec.qp,
            x0,
            opts,
        ),
        OptimizerKind::Smg => smg_run(oracle, &spec.step, &spec.qp, x0, opts),
        OptimizerKind::Mgda => mgda_run(oracle.suite(), &spec.step, &spec.qp, x0, opts),
        OptimizerKind::LinearScalarization => {
            let weights = spec
                .fixed_weights
                .as_ref()
                .ok_or_else(|| Error::invalid("linear scalarization needs fixed weights"))?;
            ls_run(oracle, weights, &spec.step, x0, opts)
        }
        OptimizerKind::RandomWeights => {
            random_weights_run(oracle, weight_rng, &spec.step, x0, opts)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::MomentumSchedule;

    fn two_quadratics() -> Suite {
        Suite::quadratic(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn fonseca_origin_is_a_fixed_point() {
        let suite = Suite::fonseca(1).unwrap();
        let x0 = DecisionVector::zeros(1).unwrap();
        let step = StepSchedule::constant(0.5).unwrap();
        let mut oracle = NoisyOracle::new(&suite, 0.0, RngStream::new(1, 0)).unwrap();
        let traj = psmgd_run(
            &mut oracle,
            3,
            &step,
            &MomentumSchedule::fixed(0.9).unwrap(),
            &QpOptions::default(),
            &x0,
            &RunOptions::new(20),
        )
        .unwrap();
        assert_eq!(traj.records[0].lambda.as_slice(), &[0.5, 0.5]);
        assert_eq!(traj.final_x, vec![0.0]);

        let traj = mgda_run(
            &suite,
            &step,
            &QpOptions::default(),
            &x0,
            &RunOptions::new(20),
        )
        .unwrap();
        assert_eq!(traj.final_x, vec![0.0]);
    }

    #[test]
    fn mgda_stays_on_pareto_segment() {
        let suite = two_quadratics();
        let x0 = DecisionVector::zeros(2).unwrap();
        let step = StepSchedule::constant(0.1).unwrap();
        let traj = mgda_run(
            &suite,
            &step,
            &QpOptions::default(),
            &x0,
            &RunOptions::new(10),
        )
        .unwrap();
        assert_eq!(traj.final_x, vec![0.0, 0.0]);
        assert_eq!(traj.budget.gradient_evals, 20);
    }

    #[test]
    fn ls_converges_to_selected_center() {
        let suite = two_quadratics();
        let x0 = DecisionVector::new(vec![0.3, -2.0]).unwrap();
        let step = StepSchedule::constant(0.1).unwrap();
        let mut oracle = NoisyOracle::new(&suite, 0.0, RngStream::new(0, 0)).unwrap();
        let e1 = SimplexWeights::vertex(2, 0).unwrap();
        let traj = ls_run(&mut oracle, &e1, &step, &x0, &RunOptions::new(200)).unwrap();
        let err = ((traj.final_x[0] - 1.0).powi(2) + traj.final_x[1].powi(2)).sqrt();
        assert!(err <= 1e-3, "{err}");
        assert_eq!(traj.budget.gradient_evals, 200);

        let mut oracle = NoisyOracle::new(&suite, 0.0, RngStream::new(0, 0)).unwrap();
        let uniform = SimplexWeights::uniform(2).unwrap();
        let traj = ls_run(&mut oracle, &uniform, &step, &x0, &RunOptions::new(300)).unwrap();
        assert!(traj.final_x.iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn smg_charges_s_per_iteration() {
        let suite = Suite::quadratic(
            vec![vec![0.0; 2], vec![1.0; 2], vec![-1.0, 2.0]],
            vec![1.0; 3],
        )
        .unwrap();
        let mut oracle = NoisyOracle::new(&suite, 0.3, RngStream::new(2, 0)).unwrap();
        let step = StepSchedule::constant(0.1).unwrap();
        let x0 = DecisionVector::zeros(2).unwrap();
        let traj = smg_run(
            &mut oracle,
            &step,
            &QpOptions::default(),
            &x0,
            &RunOptions::new(100),
        )
        .unwrap();
        assert_eq!(traj.budget.gradient_evals, 300);
    }

    #[test]
    fn single_step_uses_fresh_weights() {
        let suite = two_quadratics();
        let mut oracle = NoisyOracle::new(&suite, 0.5, RngStream::new(9, 0)).unwrap();
        let step = StepSchedule::constant(0.1).unwrap();
        let x0 = DecisionVector::new(vec![0.2, 1.0]).unwrap();
        let traj = psmgd_run(
            &mut oracle,
            8,
            &step,
            &MomentumSchedule::fixed(0.9).unwrap(),
            &QpOptions::default(),
            &x0,
            &RunOptions::new(1),
        )
        .unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.records[0].alpha, 0.0);
        assert_eq!(traj.records[0].bp_cumulative, 2);
    }

    #[test]
    fn divergence_returns_partial_trajectory() {
        let suite = Suite::quadratic(vec![vec![0.0]], vec![1.0]).unwrap();
        let mut oracle = NoisyOracle::new(&suite, 0.0, RngStream::new(0, 0)).unwrap();
        // eta = 3 with a = 1 multiplies x by -2 per step
        let step = StepSchedule::constant(3.0).unwrap();
        let x0 = DecisionVector::new(vec![1.0]).unwrap();
        let e1 = SimplexWeights::vertex(1, 0).unwrap();
        match ls_run(&mut oracle, &e1, &step, &x0, &RunOptions::new(5000)) {
            Err(Error::Diverged { iteration, partial }) => {
                assert!(iteration > 100);
                assert_eq!(partial.len(), iteration + 1);
                assert!(partial.final_x.iter().all(|v| v.is_finite()));
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn random_weights_single_objective() {
        let mut rng = RngStream::new(3, 2);
        assert_eq!(
            sample_random_weights(1, &mut rng).unwrap().as_slice(),
            &[1.0]
        );
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let suite = two_quadratics();
        let step = StepSchedule::constant(0.1).unwrap();
        let x0 = DecisionVector::zeros(3).unwrap();
        assert!(mgda_run(
            &suite,
            &step,
            &QpOptions::default(),
            &x0,
            &RunOptions::new(3)
        )
        .is_err());
        let x0 = DecisionVector::zeros(2).unwrap();
        assert!(mgda_run(
            &suite,
            &step,
            &QpOptions::default(),
            &x0,
            &RunOptions::new(0)
        )
        .is_err());
    }
}
