//! Flat `key = value` experiment configuration with dotted keys.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::optimizers::{
    MomentumSchedule, OptimizerKind, OptimizerSpec, StepSchedule, DEFAULT_MOMENTUM, DEFAULT_PERIOD,
};
use crate::simplex_qp::{QpOptions, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use crate::types::SimplexWeights;

use super::experiments::RateFamily;

/// Every key the parser accepts.
pub const KNOWN_KEYS: &[&str] = &[
    "problem.kind",
    "problem.d",
    "problem.S",
    "problem.scales",
    "problem.centers",
    "problem.rank",
    "problem.smoothness",
    "problem.seed",
    "optimizer.kind",
    "optimizer.R",
    "optimizer.weights",
    "optimizer.step.kind",
    "optimizer.step.value",
    "optimizer.momentum.kind",
    "optimizer.momentum.alpha",
    "optimizer.qp.tol",
    "optimizer.qp.max_iters",
    "sigma",
    "T",
    "seeds",
    "log_every",
    "stationarity_every",
    "output_dir",
    "label",
    "init.box",
    "init.x0",
    "pareto.starts",
    "rates.family",
    "rates.horizons",
    "bpsweep.S",
    "bpsweep.R",
    "bpsweep.T",
    "report.baseline",
    "report.dir",
];

/// Raw dotted key-value pairs. Later inserts win.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigMap(BTreeMap<String, String>);

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = ConfigMap::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(
                    format!("line {}", n + 1),
                    format!("expected `key = value`, got `{line}`"),
                )
            })?;
            map.set(key.trim(), value.trim())?;
        }
        Ok(map)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::config(key, "unknown configuration key"));
        }
        self.0.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::config(key, format!("cannot parse `{v}`"))),
        }
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => parse_list(v)
                .map(Some)
                .map_err(|_| Error::config(key, format!("cannot parse list `{v}`"))),
        }
    }
}

fn parse_list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, ()> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| ()))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemConfig {
    Fonseca {
        dim: usize,
    },
    Quadratic {
        centers: Option<Vec<Vec<f64>>>,
        scales: Option<Vec<f64>>,
        n_objectives: usize,
        dim: usize,
        seed: u64,
    },
    ConvexLs {
        n_objectives: usize,
        dim: usize,
        rank: usize,
        smoothness: f64,
        seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitConfig {
    /// Starting points are drawn uniformly from `[-half_width, half_width]^d`.
    pub half_width: f64,
    pub x0: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub optimizer: OptimizerSpec,
    pub sigma: f64,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub log_every: usize,
    pub stationarity_every: usize,
    pub output_dir: PathBuf,
    pub label: String,
    pub init: InitConfig,
    pub pareto_starts: Option<usize>,
    pub rates_family: Option<RateFamily>,
    pub rates_horizons: Option<Vec<usize>>,
    pub bpsweep_objectives: Vec<u64>,
    pub bpsweep_periods: Vec<u64>,
    pub bpsweep_horizon: u64,
    pub report_baseline: Option<String>,
    pub report_dir: Option<PathBuf>,
}

pub const DEFAULT_STEP: f64 = 0.1;
pub const DEFAULT_HORIZON: usize = 1000;
pub const DEFAULT_STATIONARITY_EVERY: usize = 10;
pub const DEFAULT_INIT_BOX: f64 = 2.0;
/// Reuse periods swept by the ablation command.
pub const ABLATION_PERIODS: [u64; 4] = [4, 8, 16, 32];

impl ExperimentConfig {
    pub fn from_map(map: &ConfigMap) -> Result<Self> {
        let horizon: usize = map.parsed("T")?.unwrap_or(DEFAULT_HORIZON);
        if horizon == 0 {
            return Err(Error::config("T", "horizon must be >= 1"));
        }
        let problem = problem_from_map(map)?;
        let n_objectives = match &problem {
            ProblemConfig::Fonseca { .. } => 2,
            ProblemConfig::Quadratic { n_objectives, .. }
            | ProblemConfig::ConvexLs { n_objectives, .. } => *n_objectives,
        };
        let optimizer = optimizer_from_map(map, horizon, n_objectives)?;

        let sigma: f64 = map.parsed("sigma")?.unwrap_or(0.0);
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::config("sigma", "noise scale must be >= 0"));
        }
        let seeds: Vec<u64> = map.list("seeds")?.unwrap_or_else(|| vec![0]);
        check_seeds(&seeds)?;
        let log_every: usize = map.parsed("log_every")?.unwrap_or(1);
        if log_every == 0 {
            return Err(Error::config("log_every", "must be >= 1"));
        }
        let half_width: f64 = map.parsed("init.box")?.unwrap_or(DEFAULT_INIT_BOX);
        if !(half_width >= 0.0) || !half_width.is_finite() {
            return Err(Error::config("init.box", "half width must be >= 0"));
        }
        let rates_family = map
            .get("rates.family")
            .map(|v| {
                v.parse().map_err(|_| {
                    Error::config("rates.family", format!("expected sc, gc or nc, got `{v}`"))
                })
            })
            .transpose()?;

        Ok(Self {
            problem,
            optimizer,
            sigma,
            horizon,
            seeds,
            log_every,
            stationarity_every: map
                .parsed("stationarity_every")?
                .unwrap_or(DEFAULT_STATIONARITY_EVERY),
            output_dir: map
                .get("output_dir")
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("results")),
            label: map
                .get("label")
                .map(str::to_string)
                .unwrap_or_else(|| map.get("optimizer.kind").unwrap_or("psmgd").to_string()),
            init: InitConfig {
                half_width,
                x0: map.list("init.x0")?,
            },
            pareto_starts: map.parsed("pareto.starts")?,
            rates_family,
            rates_horizons: map.list("rates.horizons")?,
            bpsweep_objectives: map.list("bpsweep.S")?.unwrap_or_else(|| vec![1, 2, 3, 4]),
            bpsweep_periods: map
                .list("bpsweep.R")?
                .unwrap_or_else(|| std::iter::once(1).chain(ABLATION_PERIODS).collect()),
            bpsweep_horizon: map.parsed("bpsweep.T")?.unwrap_or(100),
            report_baseline: map.get("report.baseline").map(str::to_string),
            report_dir: map.get("report.dir").map(PathBuf::from),
        })
    }

    pub fn n_objectives(&self) -> usize {
        match &self.problem {
            ProblemConfig::Fonseca { .. } => 2,
            ProblemConfig::Quadratic { n_objectives, .. }
            | ProblemConfig::ConvexLs { n_objectives, .. } => *n_objectives,
        }
    }
}

pub(crate) fn check_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::config("seeds", "at least one seed is required"));
    }
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::config("seeds", "seeds must be distinct"));
    }
    Ok(())
}

fn problem_from_map(map: &ConfigMap) -> Result<ProblemConfig> {
    let kind = map.get("problem.kind").unwrap_or("fonseca");
    let dim: Option<usize> = map.parsed("problem.d")?;
    let n_objectives: Option<usize> = map.parsed("problem.S")?;
    let seed: u64 = map.parsed("problem.seed")?.unwrap_or(0);
    if dim == Some(0) {
        return Err(Error::config("problem.d", "dimension must be >= 1"));
    }
    if n_objectives == Some(0) {
        return Err(Error::config("problem.S", "need at least one objective"));
    }
    match kind {
        "fonseca" | "nonconvex" => {
            if n_objectives.is_some_and(|s| s != 2) {
                return Err(Error::config(
                    "problem.S",
                    "the Fonseca problem has exactly two objectives",
                ));
            }
            Ok(ProblemConfig::Fonseca {
                dim: dim.unwrap_or(5),
            })
        }
        "quadratic" => {
            let centers = match map.get("problem.centers") {
                None => None,
                Some(v) => Some(
                    v.split(';')
                        .map(parse_list::<f64>)
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| {
                            Error::config("problem.centers", format!("cannot parse `{v}`"))
                        })?,
                ),
            };
            let scales: Option<Vec<f64>> = map.list("problem.scales")?;
            let s = n_objectives
                .or(centers.as_ref().map(Vec::len))
                .or(scales.as_ref().map(Vec::len))
                .unwrap_or(2);
            let d = dim
                .or(centers.as_ref().and_then(|c| c.first().map(Vec::len)))
                .unwrap_or(5);
            if let Some(c) = &centers {
                if c.len() != s || c.iter().any(|row| row.len() != d) {
                    return Err(Error::config(
                        "problem.centers",
                        format!("need {s} centers of length {d}"),
                    ));
                }
            }
            if let Some(a) = &scales {
                if a.len() != s {
                    return Err(Error::config("problem.scales", format!("need {s} scales")));
                }
                if a.iter().any(|v| !(*v > 0.0)) {
                    return Err(Error::config("problem.scales", "scales must be positive"));
                }
            }
            Ok(ProblemConfig::Quadratic {
                centers,
                scales,
                n_objectives: s,
                dim: d,
                seed,
            })
        }
        "convex_ls" => {
            let d = dim.unwrap_or(6);
            let rank: usize = map.parsed("problem.rank")?.unwrap_or((d / 2).max(1));
            if rank == 0 || rank >= d {
                return Err(Error::config(
                    "problem.rank",
                    format!("need 1 <= rank < d = {d}"),
                ));
            }
            let smoothness: f64 = map.parsed("problem.smoothness")?.unwrap_or(1.0);
            if !(smoothness > 0.0) {
                return Err(Error::config("problem.smoothness", "must be positive"));
            }
            Ok(ProblemConfig::ConvexLs {
                n_objectives: n_objectives.unwrap_or(2),
                dim: d,
                rank,
                smoothness,
                seed,
            })
        }
        other => Err(Error::config(
            "problem.kind",
            format!("unknown problem `{other}`"),
        )),
    }
}

fn optimizer_from_map(
    map: &ConfigMap,
    horizon: usize,
    n_objectives: usize,
) -> Result<OptimizerSpec> {
    let kind: OptimizerKind = map
        .get("optimizer.kind")
        .unwrap_or("psmgd")
        .parse()
        .map_err(|e: Error| Error::config("optimizer.kind", e.to_string()))?;
    let value: f64 = map.parsed("optimizer.step.value")?.unwrap_or(DEFAULT_STEP);
    let step = match map.get("optimizer.step.kind").unwrap_or("constant") {
        "constant" => StepSchedule::constant(value),
        "constant_over_horizon" => StepSchedule::constant_over_horizon(value, horizon),
        "inverse_sqrt" => StepSchedule::inverse_sqrt(value),
        other => {
            return Err(Error::config(
                "optimizer.step.kind",
                format!("unknown schedule `{other}`"),
            ))
        }
    }
    .map_err(|e| Error::config("optimizer.step.value", e.to_string()))?;
    let alpha: f64 = map
        .parsed("optimizer.momentum.alpha")?
        .unwrap_or(DEFAULT_MOMENTUM);
    let momentum = match map.get("optimizer.momentum.kind").unwrap_or("fixed") {
        "fixed" => MomentumSchedule::fixed(alpha)
            .map_err(|e| Error::config("optimizer.momentum.alpha", e.to_string()))?,
        "eta_coupled" => MomentumSchedule::EtaCoupled,
        "nonconvex_adaptive" => MomentumSchedule::nonconvex_adaptive(),
        other => {
            return Err(Error::config(
                "optimizer.momentum.kind",
                format!("unknown schedule `{other}`"),
            ))
        }
    };
    let period: usize = map.parsed("optimizer.R")?.unwrap_or(DEFAULT_PERIOD);
    if period == 0 {
        return Err(Error::config("optimizer.R", "period must be >= 1"));
    }
    let fixed_weights = match map.list::<f64>("optimizer.weights")? {
        Some(w) => {
            if w.len() != n_objectives {
                return Err(Error::config(
                    "optimizer.weights",
                    format!("need {n_objectives} weights"),
                ));
            }
            Some(
                SimplexWeights::new(w)
                    .map_err(|e| Error::config("optimizer.weights", e.to_string()))?,
            )
        }
        None if kind == OptimizerKind::LinearScalarization => {
            Some(SimplexWeights::uniform(n_objectives)?)
        }
        None => None,
    };
    let qp = QpOptions {
        tol: map.parsed("optimizer.qp.tol")?.unwrap_or(DEFAULT_TOL),
        max_iters: map
            .parsed("optimizer.qp.max_iters")?
            .unwrap_or(DEFAULT_MAX_ITERS),
    };
    if !(qp.tol > 0.0) {
        return Err(Error::config("optimizer.qp.tol", "must be positive"));
    }
    if qp.max_iters == 0 {
        return Err(Error::config("optimizer.qp.max_iters", "must be >= 1"));
    }
    OptimizerSpec {
        kind,
        period,
        fixed_weights,
        step,
        momentum,
        qp,
    }
    .validated()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_file() {
        let text = "\
# comment
problem.kind = quadratic
problem.S = 3
problem.d = 4
optimizer.kind = psmgd   # trailing comment
optimizer.R = 4
T = 50
seeds = 1, 2, 3
";
        let cfg = ExperimentConfig::from_map(&ConfigMap::parse(text).unwrap()).unwrap();
        assert_eq!(cfg.horizon, 50);
        assert_eq!(cfg.seeds, vec![1, 2, 3]);
        assert_eq!(cfg.optimizer.period, 4);
        assert_eq!(cfg.n_objectives(), 3);
        assert_eq!(cfg.label, "psmgd");
    }

    #[test]
    fn defaults_follow_experiment_protocol() {
        let cfg = ExperimentConfig::from_map(&ConfigMap::default()).unwrap();
        assert_eq!(cfg.optimizer.period, 8);
        assert_eq!(
            cfg.optimizer.momentum,
            MomentumSchedule::Fixed { alpha: 0.9 }
        );
        assert_eq!(cfg.stationarity_every, 10);
        assert_eq!(cfg.problem, ProblemConfig::Fonseca { dim: 5 });
    }

    #[test]
    fn errors_name_the_field() {
        let err = ConfigMap::parse("optimizer.colour = red").unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "optimizer.colour"));

        let map = ConfigMap::parse("T = zero").unwrap();
        let err = ExperimentConfig::from_map(&map).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "T"));

        let map = ConfigMap::parse("seeds = 1,1").unwrap();
        let err = ExperimentConfig::from_map(&map).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "seeds"));

        let map = ConfigMap::parse("optimizer.momentum.alpha = 2").unwrap();
        let err = ExperimentConfig::from_map(&map).unwrap_err();
        assert!(
            matches!(err, Error::Config { ref field, .. } if field == "optimizer.momentum.alpha")
        );

        assert!(ConfigMap::parse("no equals sign").is_err());
    }

    #[test]
    fn later_values_win() {
        let mut map = ConfigMap::parse("T = 10").unwrap();
        map.set("T", "20").unwrap();
        assert_eq!(ExperimentConfig::from_map(&map).unwrap().horizon, 20);
    }
}
