use psmgd_py::{
    bp_count, delta_m_percent, fit_rate, mean_rank, min_norm_point, project_simplex, run, PySuite,
};
use pyo3::prelude::*;

#[test]
fn qp_and_projection() {
    let sol = min_norm_point(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 1e-8, 250).unwrap();
    assert_eq!(sol.weights, vec![0.5, 0.5]);
    assert!((sol.min_norm_sq - 0.5).abs() < 1e-15);
    assert_eq!(project_simplex(vec![2.0, 0.0]).unwrap(), vec![1.0, 0.0]);
}

#[test]
fn runs_match_accounting() {
    Python::attach(|py| {
        let suite = PySuite {
            inner: psmgd::problems::Suite::fonseca(5).unwrap(),
        };
        let traj = run(
            py,
            &suite,
            "psmgd",
            vec![0.1; 5],
            500,
            0.0,
            0,
            4,
            "constant",
            0.1,
            "fixed",
            0.9,
            None,
            10,
        )
        .unwrap();
        assert_eq!(traj.t.len(), 500);
        assert_eq!(traj.gradient_evals, 625);
        assert_eq!(bp_count(500, 2, 4, "psmgd").unwrap(), 625);
        assert!(run(
            py,
            &suite,
            "adam",
            vec![0.0; 5],
            5,
            0.0,
            0,
            4,
            "constant",
            0.1,
            "fixed",
            0.9,
            None,
            0
        )
        .is_err());
    });
}

#[test]
fn metrics() {
    let m = vec!["base".to_string(), "a".to_string(), "b".to_string()];
    let dm = delta_m_percent(
        m.clone(),
        vec![vec![10.0], vec![11.0], vec![9.0]],
        vec![false],
        "base",
    )
    .unwrap();
    assert_eq!(dm[1], ("a".to_string(), 10.0));
    let mr = mean_rank(
        m,
        vec![vec![10.0], vec![11.0], vec![9.0]],
        vec![false],
        "base",
    )
    .unwrap();
    assert_eq!(mr, vec![("a".to_string(), 2.0), ("b".to_string(), 1.0)]);
    let series: Vec<(f64, f64)> = (1..100).map(|t| (t as f64, 3.0 / t as f64)).collect();
    assert!((fit_rate(series, 0.0).unwrap().0 + 1.0).abs() < 1e-12);
}
