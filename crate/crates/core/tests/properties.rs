use proptest::prelude::*;
use psmgd::metrics::bp_count;
use psmgd::optimizers::{
    random_weights_run, run, sample_random_weights, MomentumSchedule, OptimizerKind, OptimizerSpec,
    RunOptions, StepSchedule,
};
use psmgd::problems::{NoisyOracle, Suite};
use psmgd::{DecisionVector, RngStream, SimplexWeights};

#[test]
fn random_weights_are_symmetric_on_average() {
    let n = 1000;
    let mean: f64 = (0..n)
        .map(|seed| {
            sample_random_weights(2, &mut RngStream::new(seed, 2))
                .unwrap()
                .as_slice()[0]
        })
        .sum::<f64>()
        / n as f64;
    assert!((mean - 0.5).abs() <= 0.03, "mean {mean}");
}

#[test]
fn random_weights_same_seed_same_run() {
    let suite = Suite::fonseca(3).unwrap();
    let step = StepSchedule::constant(0.1).unwrap();
    let x0 = DecisionVector::new(vec![0.5, -0.5, 1.0]).unwrap();
    let go = || {
        let mut oracle = NoisyOracle::new(&suite, 0.3, RngStream::new(8, 0)).unwrap();
        random_weights_run(
            &mut oracle,
            &mut RngStream::new(8, 2),
            &step,
            &x0,
            &RunOptions::new(50),
        )
        .unwrap()
    };
    assert_eq!(go(), go());
}

fn spec(kind: OptimizerKind, s: usize, r: usize) -> OptimizerSpec {
    let step = StepSchedule::inverse_sqrt(0.3).unwrap();
    match kind {
        OptimizerKind::Psmgd => {
            OptimizerSpec::psmgd(r, step, MomentumSchedule::nonconvex_adaptive()).unwrap()
        }
        OptimizerKind::Smg => OptimizerSpec::smg(step),
        OptimizerKind::Mgda => OptimizerSpec::mgda(step),
        OptimizerKind::LinearScalarization => {
            OptimizerSpec::linear_scalarization(SimplexWeights::uniform(s).unwrap(), step)
        }
        OptimizerKind::RandomWeights => OptimizerSpec::random_weights(step),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_stay_on_simplex_and_budget_matches(
        s in 1usize..5,
        r in 1usize..6,
        horizon in 1usize..40,
        kind_idx in 0usize..5,
        sigma in 0.0f64..2.0,
        seed in any::<u64>(),
    ) {
        let kind = OptimizerKind::ALL[kind_idx];
        let mut setup = RngStream::new(seed, 9);
        let centers = (0..s).map(|_| setup.normal_draw(4)).collect();
        let suite = Suite::quadratic(centers, vec![1.0; s]).unwrap();
        let mut oracle = NoisyOracle::new(&suite, sigma, RngStream::new(seed, 0)).unwrap();
        let x0 = DecisionVector::new(setup.normal_draw(4)).unwrap();
        let traj = run(&spec(kind, s, r), &mut oracle, &mut RngStream::new(seed, 2), &x0, &RunOptions::new(horizon)).unwrap();
        for rec in &traj.records {
            let w = rec.lambda.as_slice();
            prop_assert!(w.iter().all(|v| *v >= 0.0));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!((0.0..=1.0).contains(&rec.alpha));
        }
        prop_assert_eq!(traj.budget.gradient_evals, bp_count(horizon as u64, s as u64, r as u64, kind));
    }
}
