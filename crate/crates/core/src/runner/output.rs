//! CSV and JSON serialization.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::types::Trajectory;

/// Shortest decimal that parses back to the same `f64`.
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn trajectory_header(n_objectives: usize) -> String {
    let mut cols = vec!["t".to_string(), "eta".to_string(), "alpha".to_string()];
    cols.extend((0..n_objectives).map(|s| format!("lambda_{s}")));
    cols.extend((0..n_objectives).map(|s| format!("f_{s}")));
    cols.extend(["grad_g_norm_sq", "stationarity_gap", "bp_cumulative"].map(String::from));
    cols.join(",")
}

/// Every `log_every`-th record (always including the last one) as CSV.
pub fn trajectory_csv(traj: &Trajectory, n_objectives: usize, log_every: usize) -> String {
    let mut out = trajectory_header(n_objectives);
    out.push('\n');
    let last = traj.records.len().saturating_sub(1);
    for (i, r) in traj.records.iter().enumerate() {
        if i % log_every.max(1) != 0 && i != last {
            continue;
        }
        let _ = write!(
            out,
            "{},{},{}",
            r.t,
            format_float(r.eta),
            format_float(r.alpha)
        );
        for v in r.lambda.as_slice().iter().chain(&r.losses) {
            let _ = write!(out, ",{}", format_float(*v));
        }
        let gap = r.stationarity_gap.map(format_float).unwrap_or_default();
        let _ = writeln!(
            out,
            ",{},{},{}",
            format_float(r.weighted_grad_norm_sq),
            gap,
            r.bp_cumulative
        );
    }
    out
}

/// Rows of already formatted cells.
pub fn csv_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn json_string(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    s.push('\n');
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
