//! The CLI subcommands as library functions. Each writes its files under
//! the configured output directory and reports what it did.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::metrics::{
    bp_count, bp_ratio, delta_m_percent, mean_rank, MethodResultTable, TaskDirection,
};
use crate::optimizers::OptimizerKind;

use super::config::ExperimentConfig;
use super::experiments::{
    build_suite, map_seeds, rate_experiment, run_seed, RateFamily, SeedOutcome,
};
use super::output::{csv_table, format_float, json_string, trajectory_csv, write_text};
use super::selftest::{gradient_checks, qp_oracle, QP_INSTANCES};

pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CommandOutcome {
    pub files: Vec<PathBuf>,
    /// Human-readable progress lines.
    pub lines: Vec<String>,
    pub diverged: bool,
    /// Set by `selftest` when a check fails.
    pub failed: bool,
}

impl CommandOutcome {
    fn write(&mut self, path: PathBuf, text: &str) -> Result<()> {
        write_text(&path, text)?;
        self.files.push(path);
        Ok(())
    }
}

fn opt_float(v: Option<f64>) -> Value {
    v.filter(|x| x.is_finite()).map_or(Value::Null, Value::from)
}

fn timed_runs(
    cfg: &ExperimentConfig,
    out: &mut CommandOutcome,
) -> Result<(crate::problems::Suite, Vec<SeedOutcome>)> {
    let (suite, _) = build_suite(&cfg.problem)?;
    let runs = map_seeds(&cfg.seeds, |seed| {
        let start = Instant::now();
        run_seed(cfg, &suite, seed).map(|o| (o, start.elapsed().as_secs_f64()))
    })?;
    let mut outcomes = Vec::with_capacity(runs.len());
    for (o, secs) in runs {
        out.lines.push(match o.diverged_at {
            Some(t) => format!("seed {}: diverged at t={t} ({secs:.3} s)", o.seed),
            None => format!("seed {}: done ({secs:.3} s)", o.seed),
        });
        out.diverged |= o.diverged_at.is_some();
        outcomes.push(o);
    }
    Ok((suite, outcomes))
}

/// One run per seed: `trajectory_seed<seed>.csv` plus `summary.json`.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<CommandOutcome> {
    let mut out = CommandOutcome::default();
    let (suite, outcomes) = timed_runs(cfg, &mut out)?;
    let s = suite.n_objectives();
    for o in &outcomes {
        let path = cfg
            .output_dir
            .join(format!("trajectory_seed{}.csv", o.seed));
        out.write(path, &trajectory_csv(&o.trajectory, s, cfg.log_every))?;
    }
    let mean: Vec<f64> = (0..s)
        .map(|k| {
            outcomes
                .iter()
                .map(|o| o.trajectory.final_losses[k])
                .sum::<f64>()
                / outcomes.len() as f64
        })
        .collect();
    let runs: Vec<Value> = outcomes
        .iter()
        .map(|o| {
            json!({
                "seed": o.seed,
                "final_losses": o.trajectory.final_losses,
                "final_stationarity_gap": opt_float(o.final_gap),
                "total_bp": o.trajectory.budget.total_bp(),
                "diverged": o.diverged_at.is_some(),
                "diverged_at": o.diverged_at,
            })
        })
        .collect();
    let summary = json!({
        "label": cfg.label,
        "method": cfg.optimizer.kind.as_str(),
        "problem": suite.name(),
        "n_objectives": s,
        "dim": suite.dim(),
        "horizon": cfg.horizon,
        "sigma": cfg.sigma,
        "period": cfg.optimizer.period,
        "seeds": cfg.seeds,
        "mean_final_losses": mean,
        "any_diverged": out.diverged,
        "runs": runs,
    });
    out.write(cfg.output_dir.join(SUMMARY_FILE), &json_string(&summary))?;
    Ok(out)
}

/// Final objective values and stationarity gap of every seed in `front.csv`.
pub fn cmd_pareto(cfg: &ExperimentConfig) -> Result<CommandOutcome> {
    let mut out = CommandOutcome::default();
    let (suite, outcomes) = timed_runs(cfg, &mut out)?;
    let s = suite.n_objectives();
    let mut header = vec!["seed".to_string()];
    header.extend((0..s).map(|k| format!("f_{k}")));
    header.push("stationarity_gap".to_string());
    let rows: Vec<Vec<String>> = outcomes
        .iter()
        .map(|o| {
            let mut row = vec![o.seed.to_string()];
            row.extend(o.trajectory.final_losses.iter().map(|v| format_float(*v)));
            row.push(o.final_gap.map(format_float).unwrap_or_default());
            row
        })
        .collect();
    out.write(cfg.output_dir.join("front.csv"), &csv_table(&header, &rows))?;
    Ok(out)
}

/// Rate experiment of one family: `rates_<family>.csv` and `rate_fit_<family>.json`.
pub fn cmd_rates(
    cfg: &ExperimentConfig,
    family: RateFamily,
    horizons: &[usize],
    seeds: &[u64],
) -> Result<CommandOutcome> {
    let mut out = CommandOutcome::default();
    let report = rate_experiment(family, horizons, seeds)?;
    let x_col = if family == RateFamily::StronglyConvex {
        "T"
    } else {
        "t"
    };
    let header = [x_col.to_string(), "metric".to_string()];
    let rows: Vec<Vec<String>> = report
        .series
        .iter()
        .map(|(t, y)| vec![format!("{}", *t as u64), format_float(*y)])
        .collect();
    let name = family.as_str();
    out.write(
        cfg.output_dir.join(format!("rates_{name}.csv")),
        &csv_table(&header, &rows),
    )?;
    let fit = json!({
        "family": name,
        "horizons": report.horizons,
        "seeds": report.seeds,
        "burn_in": report.burn_in,
        "expected_slope": family.expected_slope(),
        "slope": report.fit.slope,
        "intercept": report.fit.intercept,
        "r_squared": report.fit.r_squared,
        "points_used": report.fit.points_used,
    });
    out.write(
        cfg.output_dir.join(format!("rate_fit_{name}.json")),
        &json_string(&fit),
    )?;
    out.lines.push(format!(
        "{name}: slope {:.4} (r^2 {:.4})",
        report.fit.slope, report.fit.r_squared
    ));
    Ok(out)
}

/// BP counts of every optimizer for each `(S, R)` pair in `bpsweep.csv`.
pub fn cmd_bpsweep(cfg: &ExperimentConfig) -> Result<CommandOutcome> {
    if cfg.bpsweep_objectives.contains(&0) {
        return Err(Error::config("bpsweep.S", "objective counts must be >= 1"));
    }
    if cfg.bpsweep_periods.contains(&0) {
        return Err(Error::config("bpsweep.R", "periods must be >= 1"));
    }
    let mut out = CommandOutcome::default();
    let mut header: Vec<String> = ["S", "R", "T"].map(String::from).to_vec();
    header.extend(OptimizerKind::ALL.iter().map(|k| k.as_str().to_string()));
    header.push("ratio".to_string());
    let t = cfg.bpsweep_horizon;
    let mut rows = Vec::new();
    for &s in &cfg.bpsweep_objectives {
        for &r in &cfg.bpsweep_periods {
            let mut row = vec![s.to_string(), r.to_string(), t.to_string()];
            row.extend(
                OptimizerKind::ALL
                    .iter()
                    .map(|&k| bp_count(t, s, r, k).to_string()),
            );
            row.push(format_float(bp_ratio(s, r)));
            rows.push(row);
        }
    }
    out.write(
        cfg.output_dir.join("bpsweep.csv"),
        &csv_table(&header, &rows),
    )?;
    Ok(out)
}

fn find_summaries(dir: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    paths.sort();
    for p in paths {
        if p.is_dir() {
            find_summaries(&p, found)?;
        } else if p.file_name().is_some_and(|n| n == SUMMARY_FILE) {
            found.push(p);
        }
    }
    Ok(())
}

/// Builds the method table from every `summary.json` below `results_dir`.
/// Tasks are the mean final objective values, lower is better.
pub fn load_result_table(results_dir: &Path, baseline: &str) -> Result<MethodResultTable> {
    let mut paths = Vec::new();
    find_summaries(results_dir, &mut paths)?;
    let mut methods = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for path in &paths {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        let label = v["label"]
            .as_str()
            .ok_or_else(|| Error::invalid(format!("{}: missing `label`", path.display())))?;
        let losses: Vec<f64> = v["mean_final_losses"]
            .as_array()
            .and_then(|a| a.iter().map(Value::as_f64).collect())
            .ok_or_else(|| {
                Error::invalid(format!("{}: missing `mean_final_losses`", path.display()))
            })?;
        if methods.iter().any(|m| m == label) {
            return Err(Error::invalid(format!("duplicate method label `{label}`")));
        }
        if values
            .first()
            .is_some_and(|first| first.len() != losses.len())
        {
            return Err(Error::invalid(format!(
                "{}: objective count differs",
                path.display()
            )));
        }
        methods.push(label.to_string());
        values.push(losses);
    }
    if methods.len() < 2 {
        return Err(Error::config(
            "report.dir",
            format!("need at least 2 run summaries, found {}", methods.len()),
        ));
    }
    if !methods.iter().any(|m| m == baseline) {
        return Err(Error::config(
            "report.baseline",
            format!("no summary labelled `{baseline}`"),
        ));
    }
    let n_tasks = values[0].len();
    MethodResultTable::new(
        methods,
        (0..n_tasks).map(|k| format!("f_{k}")).collect(),
        values,
        vec![TaskDirection::LowerBetter; n_tasks],
        baseline,
    )
}

/// `report.md` and `report.csv` with Δm% and MR per method.
pub fn cmd_report(
    results_dir: &Path,
    out_dir: &Path,
    baseline: Option<&str>,
) -> Result<CommandOutcome> {
    let baseline =
        baseline.ok_or_else(|| Error::config("report.baseline", "a baseline label is required"))?;
    let table = load_result_table(results_dir, baseline)?;
    let ranks = mean_rank(&table)?;
    let mut header = vec!["method".to_string()];
    header.extend(table.tasks.iter().cloned());
    header.extend(["delta_m_percent".to_string(), "mean_rank".to_string()]);
    let mut rows = Vec::new();
    for (m, vals) in table.methods.iter().zip(&table.values) {
        let mut row = vec![m.clone()];
        row.extend(vals.iter().map(|v| format_float(*v)));
        row.push(format_float(delta_m_percent(&table, m)?));
        row.push(
            ranks
                .iter()
                .find(|(name, _)| name == m)
                .map(|(_, r)| format_float(*r))
                .unwrap_or_default(),
        );
        rows.push(row);
    }
    let mut md = format!(
        "# Method comparison\n\nBaseline: `{baseline}`. All tasks are lower-is-better.\n\n"
    );
    md.push_str(&format!("| {} |\n", header.join(" | ")));
    md.push_str(&format!("|{}\n", "---|".repeat(header.len())));
    for row in &rows {
        let cells: Vec<&str> = row
            .iter()
            .map(|c| if c.is_empty() { "-" } else { c.as_str() })
            .collect();
        md.push_str(&format!("| {} |\n", cells.join(" | ")));
    }
    let mut out = CommandOutcome::default();
    out.write(out_dir.join("report.md"), &md)?;
    out.write(out_dir.join("report.csv"), &csv_table(&header, &rows))?;
    Ok(out)
}

/// Gradient checks on every suite and the brute-force QP comparison.
pub fn cmd_selftest(out_dir: Option<&Path>) -> Result<CommandOutcome> {
    let mut out = CommandOutcome::default();
    let checks = gradient_checks(0)?;
    for c in &checks {
        out.lines.push(format!(
            "gradient {:<10} {} points  max rel error {:.2e}  {}",
            c.suite,
            c.points,
            c.max_rel_error,
            if c.passed { "PASS" } else { "FAIL" }
        ));
        out.failed |= !c.passed;
    }
    let qp = qp_oracle(0, QP_INSTANCES)?;
    for r in &qp {
        out.lines.push(format!(
            "qp S={} d={} {} instances  max |err| {:.2e}  converged {}  kkt failures {}  {}",
            r.n_objectives,
            r.dim,
            r.instances,
            r.max_abs_error,
            r.converged,
            r.kkt_failures,
            if r.passed { "PASS" } else { "FAIL" }
        ));
        out.failed |= !r.passed;
    }
    if let Some(dir) = out_dir {
        let report = json!({ "gradient_checks": checks, "qp_oracle": qp, "passed": !out.failed });
        out.write(dir.join("selftest.json"), &json_string(&report))?;
    }
    Ok(out)
}
