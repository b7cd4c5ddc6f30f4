//! Convergence diagnostics, backpropagation accounting, multi-task summary
//! metrics and log-log rate fitting.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::optimizers::OptimizerKind;
use crate::problems::Suite;
use crate::simplex_qp::{min_norm_point, DEFAULT_MAX_ITERS};
use crate::types::SimplexWeights;

/// `min_lambda |lambda^T grad F(x)|^2` over the simplex with exact
/// gradients. Never charged to an oracle budget.
pub fn stationarity_gap(suite: &Suite, x: &[f64], tol: f64) -> Result<f64> {
    if x.len() != suite.dim() {
        return Err(Error::invalid("x dimension does not match the suite"));
    }
    Ok(min_norm_point(&suite.gradients(x), tol, DEFAULT_MAX_ITERS)?.min_norm_sq)
}

/// Gradient evaluations spent by `T` iterations of `method`.
pub fn bp_count(horizon: u64, n_objectives: u64, period: u64, method: OptimizerKind) -> u64 {
    match method {
        OptimizerKind::Psmgd => {
            let recomputes = horizon.div_ceil(period.max(1));
            recomputes * n_objectives + (horizon - recomputes)
        }
        OptimizerKind::Smg | OptimizerKind::Mgda => horizon * n_objectives,
        OptimizerKind::LinearScalarization | OptimizerKind::RandomWeights => horizon,
    }
}

/// Asymptotic PSMGD-to-SMG cost per iteration, `(S + R - 1) / (R S)`.
pub fn bp_ratio(n_objectives: u64, period: u64) -> f64 {
    (n_objectives + period - 1) as f64 / (period * n_objectives) as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskDirection {
    HigherBetter,
    LowerBetter,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodResultTable {
    pub methods: Vec<String>,
    pub tasks: Vec<String>,
    /// `values[m][n]`.
    pub values: Vec<Vec<f64>>,
    pub directions: Vec<TaskDirection>,
    pub baseline: String,
}

impl MethodResultTable {
    pub fn new(
        methods: Vec<String>,
        tasks: Vec<String>,
        values: Vec<Vec<f64>>,
        directions: Vec<TaskDirection>,
        baseline: impl Into<String>,
    ) -> Result<Self> {
        let baseline = baseline.into();
        if values.len() != methods.len() || values.iter().any(|row| row.len() != tasks.len()) {
            return Err(Error::invalid(
                "result table shape does not match methods x tasks",
            ));
        }
        if directions.len() != tasks.len() {
            return Err(Error::invalid("need one direction per task"));
        }
        if !methods.contains(&baseline) {
            return Err(Error::invalid(format!(
                "baseline `{baseline}` is not in the table"
            )));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("result table has non-finite values"));
        }
        Ok(Self {
            methods,
            tasks,
            values,
            directions,
            baseline,
        })
    }

    fn row(&self, method: &str) -> Result<&[f64]> {
        self.methods
            .iter()
            .position(|m| m == method)
            .map(|i| self.values[i].as_slice())
            .ok_or_else(|| Error::invalid(format!("method `{method}` is not in the table")))
    }
}

/// Average relative drop against the baseline, in percent. Lower is better.
pub fn delta_m_percent(table: &MethodResultTable, method: &str) -> Result<f64> {
    let base = table.row(&table.baseline)?;
    let row = table.row(method)?;
    if let Some(n) = base.iter().position(|b| *b == 0.0) {
        return Err(Error::invalid(format!(
            "baseline value for task `{}` is zero",
            table.tasks[n]
        )));
    }
    let total: f64 = row
        .iter()
        .zip(base)
        .zip(&table.directions)
        .map(|((m, b), dir)| {
            let sign = match dir {
                TaskDirection::HigherBetter => -1.0,
                TaskDirection::LowerBetter => 1.0,
            };
            sign * 100.0 * (m - b) / b
        })
        .sum();
    Ok(total / table.tasks.len() as f64)
}

/// Mean fractional rank per non-baseline method, in table order.
pub fn mean_rank(table: &MethodResultTable) -> Result<Vec<(String, f64)>> {
    let ranked: Vec<usize> = (0..table.methods.len())
        .filter(|&i| table.methods[i] != table.baseline)
        .collect();
    if table.methods.len() < 2 || ranked.is_empty() {
        return Err(Error::invalid(
            "mean rank needs the baseline and at least one other method",
        ));
    }
    if table.tasks.is_empty() {
        return Err(Error::invalid("mean rank needs at least one task"));
    }
    let mut sums = vec![0.0; ranked.len()];
    for (n, dir) in table.directions.iter().enumerate() {
        // larger score = better
        let score = |i: usize| match dir {
            TaskDirection::HigherBetter => table.values[i][n],
            TaskDirection::LowerBetter => -table.values[i][n],
        };
        for (slot, &i) in ranked.iter().enumerate() {
            let better = ranked.iter().filter(|&&j| score(j) > score(i)).count();
            let tied = ranked.iter().filter(|&&j| score(j) == score(i)).count();
            // average of ranks better+1 ..= better+tied
            sums[slot] += better as f64 + (tied as f64 + 1.0) / 2.0;
        }
    }
    Ok(ranked
        .iter()
        .zip(sums)
        .map(|(&i, s)| (table.methods[i].clone(), s / table.tasks.len() as f64))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
}

/// Least-squares fit of `ln y = intercept + slope ln t`, ignoring points with
/// `t < burn_in` and non-positive coordinates.
pub fn fit_rate(series: &[(f64, f64)], burn_in: f64) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, y)| *t >= burn_in && *t > 0.0 && *y > 0.0 && t.is_finite() && y.is_finite())
        .map(|(t, y)| (t.ln(), y.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::invalid(format!(
            "rate fit needs >= 3 positive points after burn-in, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid(
            "rate fit needs at least two distinct t values",
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        points_used: pts.len(),
    })
}

/// First 10% of the horizon.
pub fn default_burn_in(horizon: usize) -> f64 {
    (horizon / 10) as f64
}

/// `a_k = (1/k) sum_{i<k} v_i` for `k = 1..=len`.
pub fn running_average(values: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            acc += v;
            acc / (i + 1) as f64
        })
        .collect()
}

/// `G(x, lambda) - G(x*(lambda), lambda)` on a quadratic suite.
pub fn suboptimality_sc(suite: &Suite, x: &[f64], lambda: &SimplexWeights) -> Result<f64> {
    let Suite::Quadratic(q) = suite else {
        return Err(Error::Unsupported(format!(
            "strongly convex suboptimality needs a quadratic suite, got {}",
            suite.name()
        )));
    };
    let x_star = q.weighted_minimizer(lambda)?;
    Ok((suite.weighted_value(x, lambda) - suite.weighted_value(&x_star, lambda)).max(0.0))
}

/// `G(x, lambda) - G(x_ref, lambda)` against a fixed reference point.
pub fn reference_gap(suite: &Suite, x: &[f64], x_ref: &[f64], lambda: &SimplexWeights) -> f64 {
    suite.weighted_value(x, lambda) - suite.weighted_value(x_ref, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(values: Vec<Vec<f64>>, directions: Vec<TaskDirection>) -> MethodResultTable {
        let methods = (0..values.len())
            .map(|i| {
                if i == 0 {
                    "stl".to_string()
                } else {
                    format!("m{i}")
                }
            })
            .collect();
        let tasks = (0..directions.len()).map(|n| format!("t{n}")).collect();
        MethodResultTable::new(methods, tasks, values, directions, "stl").unwrap()
    }

    use TaskDirection::{HigherBetter as Hi, LowerBetter as Lo};

    #[test]
    fn stationarity_examples() {
        let fon = Suite::fonseca(1).unwrap();
        assert!(stationarity_gap(&fon, &[0.0], 1e-8).unwrap() < 1e-10);

        let q = Suite::quadratic(vec![vec![1.0, 2.0]], vec![2.0]).unwrap();
        let gap = stationarity_gap(&q, &[0.0, 0.0], 1e-8).unwrap();
        assert!((gap - 20.0).abs() < 1e-12);

        let q = Suite::quadratic(
            vec![vec![1.0, 0.0], vec![-1.0, 1.0], vec![0.5, -2.0]],
            vec![1.0, 2.0, 0.5],
        )
        .unwrap();
        let lambda = SimplexWeights::new(vec![0.2, 0.5, 0.3]).unwrap();
        let Suite::Quadratic(inner) = &q else {
            unreachable!()
        };
        let x = inner.weighted_minimizer(&lambda).unwrap();
        assert!(stationarity_gap(&q, &x, 1e-8).unwrap() < 1e-9);
    }

    #[test]
    fn fonseca_segment_is_stationary() {
        let d = 5;
        let fon = Suite::fonseca(d).unwrap();
        for k in 0..=20 {
            let t = -1.0 + 0.1 * k as f64;
            let x = vec![t / (d as f64).sqrt(); d];
            assert!(stationarity_gap(&fon, &x, 1e-8).unwrap() < 1e-10, "t={t}");
        }
        // off the segment the gap is strictly positive; compare with a grid over lambda
        let mut off = vec![0.0; d];
        off[0] = 1.5;
        let g = fon.gradients(&off);
        let brute = (0..=100_000)
            .map(|k| {
                let l = k as f64 / 100_000.0;
                g.row(0)
                    .iter()
                    .zip(g.row(1))
                    .map(|(a, b)| (l * a + (1.0 - l) * b).powi(2))
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        let gap = stationarity_gap(&fon, &off, 1e-8).unwrap();
        assert!((gap - brute).abs() < 1e-9, "{gap} vs {brute}");
        assert!(gap > 1e-3);
    }

    #[test]
    fn bp_examples() {
        assert_eq!(bp_count(100, 3, 4, OptimizerKind::Psmgd), 150);
        assert_eq!(bp_count(100, 3, 1, OptimizerKind::Psmgd), 300);
        assert_eq!(bp_count(100, 3, 1, OptimizerKind::Smg), 300);
        assert_eq!(bp_count(100, 3, 7, OptimizerKind::LinearScalarization), 100);
        assert_eq!(bp_count(500, 2, 4, OptimizerKind::Psmgd), 625);
        assert_eq!(bp_ratio(3, 4), 0.5);
        assert_eq!(bp_ratio(5, 1), 1.0);
        assert_eq!(bp_ratio(1, 9), 1.0);
    }

    #[test]
    fn bp_ratio_is_the_long_run_limit() {
        let (s, r) = (3, 4);
        let t = 4_000_000;
        let ratio = bp_count(t, s, r, OptimizerKind::Psmgd) as f64
            / bp_count(t, s, r, OptimizerKind::Smg) as f64;
        assert!((ratio - bp_ratio(s, r)).abs() < 1e-6);
    }

    #[test]
    fn delta_m_examples() {
        let t = table(vec![vec![1.0, 2.0], vec![1.0, 2.0]], vec![Hi, Lo]);
        assert_eq!(delta_m_percent(&t, "m1").unwrap(), 0.0);
        let t = table(vec![vec![10.0], vec![11.0]], vec![Lo]);
        assert!((delta_m_percent(&t, "m1").unwrap() - 10.0).abs() < 1e-12);
        let t = table(vec![vec![0.9, 10.0], vec![0.9, 9.0]], vec![Hi, Lo]);
        assert!((delta_m_percent(&t, "m1").unwrap() + 5.0).abs() < 1e-12);
        let t = table(vec![vec![0.0], vec![1.0]], vec![Lo]);
        assert!(delta_m_percent(&t, "m1").is_err());
    }

    #[test]
    fn mean_rank_examples() {
        // m1 best on every task, mixed directions
        let t = table(
            vec![
                vec![0.0, 0.0],
                vec![0.9, 1.0],
                vec![0.5, 2.0],
                vec![0.1, 3.0],
            ],
            vec![Hi, Lo],
        );
        let mr = mean_rank(&t).unwrap();
        assert_eq!(mr[0], ("m1".to_string(), 1.0));

        let t = table(
            vec![vec![1.0, 1.0], vec![2.0, 3.0], vec![2.0, 3.0]],
            vec![Lo, Lo],
        );
        assert!(mean_rank(&t).unwrap().iter().all(|(_, r)| *r == 1.5));

        let t = table(
            vec![vec![1.0, 1.0], vec![1.0, 5.0], vec![2.0, 3.0]],
            vec![Lo, Lo],
        );
        assert!(mean_rank(&t).unwrap().iter().all(|(_, r)| *r == 1.5));

        let t = table(vec![vec![1.0], vec![1.0]], vec![Lo]);
        assert_eq!(mean_rank(&t).unwrap(), vec![("m1".to_string(), 1.0)]);

        let t = table(vec![vec![1.0]], vec![Lo]);
        assert!(mean_rank(&t).is_err());
    }

    #[test]
    fn fit_examples() {
        let ts: Vec<f64> = (10..=1000).map(|t| t as f64).collect();
        let f = fit_rate(&ts.iter().map(|&t| (t, 5.0 / t)).collect::<Vec<_>>(), 0.0).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let f = fit_rate(
            &ts.iter().map(|&t| (t, 2.0 / t.sqrt())).collect::<Vec<_>>(),
            0.0,
        )
        .unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        let f = fit_rate(&ts.iter().map(|&t| (t, 3.0)).collect::<Vec<_>>(), 0.0).unwrap();
        assert!(f.slope.abs() < 1e-12);
        assert!(fit_rate(&[(1.0, 1.0), (2.0, 0.5)], 0.0).is_err());
        assert!(fit_rate(&ts.iter().map(|&t| (t, 1.0 / t)).collect::<Vec<_>>(), 999.0).is_err());
    }

    #[test]
    fn suboptimality_examples() {
        let q = Suite::quadratic(vec![vec![0.0, 0.0]], vec![1.0]).unwrap();
        let one = SimplexWeights::vertex(1, 0).unwrap();
        assert!((suboptimality_sc(&q, &[2.0, 0.0], &one).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(suboptimality_sc(&q, &[0.0, 0.0], &one).unwrap(), 0.0);

        let q = Suite::quadratic(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![1.0, 1.0]).unwrap();
        let half = SimplexWeights::uniform(2).unwrap();
        assert_eq!(suboptimality_sc(&q, &[0.0, 0.0], &half).unwrap(), 0.0);

        let fon = Suite::fonseca(2).unwrap();
        assert!(matches!(
            suboptimality_sc(&fon, &[0.0, 0.0], &half),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn running_average_values() {
        assert_eq!(running_average(&[2.0, 4.0, 6.0]), vec![2.0, 3.0, 4.0]);
    }

    fn permute_columns(t: &MethodResultTable, perm: &[usize]) -> MethodResultTable {
        MethodResultTable {
            tasks: perm.iter().map(|&i| t.tasks[i].clone()).collect(),
            values: t
                .values
                .iter()
                .map(|row| perm.iter().map(|&i| row[i]).collect())
                .collect(),
            directions: perm.iter().map(|&i| t.directions[i]).collect(),
            ..t.clone()
        }
    }

    proptest! {
        #[test]
        fn power_laws_are_recovered(exponent in -2.0f64..0.5, scale in 0.01f64..100.0) {
            let series: Vec<(f64, f64)> = (1..200).map(|k| {
                let t = 10.0 * k as f64;
                (t, scale * t.powf(exponent))
            }).collect();
            let f = fit_rate(&series, 0.0).unwrap();
            prop_assert!((f.slope - exponent).abs() < 1e-12);
        }

        #[test]
        fn summary_metrics_respect_symmetries(
            raw in proptest::collection::vec(proptest::collection::vec(0.1f64..10.0, 3), 4),
            hi in proptest::collection::vec(proptest::bool::ANY, 3),
        ) {
            let directions: Vec<TaskDirection> = hi.iter().map(|&h| if h { Hi } else { Lo }).collect();
            let t = table(raw.clone(), directions.clone());
            let p = permute_columns(&t, &[2, 0, 1]);
            for m in &t.methods {
                let a = delta_m_percent(&t, m).unwrap();
                let b = delta_m_percent(&p, m).unwrap();
                prop_assert!((a - b).abs() < 1e-9);
            }
            // strictly increasing transform leaves the ranks alone
            let mono = MethodResultTable {
                values: raw.iter().map(|row| row.iter().map(|v| v.ln() * 3.0 + v.powi(3)).collect()).collect(),
                ..t.clone()
            };
            prop_assert_eq!(mean_rank(&t).unwrap(), mean_rank(&mono).unwrap());
        }
    }
}
