//! Command-line front end. Dotted configuration keys may be given as flags
//! (`--optimizer.kind smg` or `--T=500`); these override the config file.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};

use super::commands::{
    cmd_bpsweep, cmd_pareto, cmd_rates, cmd_report, cmd_run, cmd_selftest, CommandOutcome,
};
use super::config::{ConfigMap, ExperimentConfig, KNOWN_KEYS};
use super::experiments::RateFamily;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Seeds used by `rates` when none are configured.
pub const DEFAULT_RATE_SEEDS: usize = 10;

#[derive(Debug, Parser)]
#[command(
    name = "psmgd",
    version,
    about = "Periodic stochastic multi-gradient descent experiments",
    after_help = "Any configuration key can also be passed as a flag, e.g. `--optimizer.R 4` or `--T=500`."
)]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed to run; repeat for several (overrides `seeds`).
    #[arg(long = "seed", global = true)]
    seeds: Vec<u64>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One run per seed; writes trajectories and a summary.
    Run,
    /// Multi-start runs; writes the final objective values per seed.
    Pareto {
        /// Number of starts (overrides `pareto.starts`).
        #[arg(long)]
        starts: Option<usize>,
    },
    /// Empirical convergence rate of one family (sc, gc or nc).
    Rates { family: Option<String> },
    /// Backpropagation counts for every (S, R) pair.
    Bpsweep,
    /// Delta-m% and mean rank table from run summaries.
    Report {
        /// Directory searched for `summary.json` files.
        dir: Option<PathBuf>,
    },
    /// Gradient checks and the brute-force min-norm comparison.
    Selftest,
}

type Overrides = Vec<(String, String)>;

/// Splits recognized configuration flags from the arguments clap handles.
fn split_overrides(args: &[String]) -> Result<(Vec<String>, Overrides)> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            rest.push(arg.clone());
            continue;
        };
        let (key, inline) = match flag.split_once('=') {
            Some((k, v)) => (k, Some(v.to_string())),
            None => (flag, None),
        };
        if !KNOWN_KEYS.contains(&key) {
            rest.push(arg.clone());
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it
                .next()
                .cloned()
                .ok_or_else(|| Error::config(key, "flag needs a value"))?,
        };
        overrides.push((key.to_string(), value));
    }
    Ok((rest, overrides))
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::InvalidArgument(_) | Error::Unsupported(_) => EXIT_USAGE,
        Error::Diverged { .. } => EXIT_DIVERGED,
        Error::Io { .. } => EXIT_IO,
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn main_with_args(args: &[String]) -> i32 {
    let (rest, overrides) = match split_overrides(args) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("psmgd: {e}");
            return exit_code(&e);
        }
    };
    let cli = match Cli::try_parse_from(&rest) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let quiet = cli.quiet;
    match dispatch(cli, &overrides) {
        Ok(outcome) => {
            if !quiet {
                for line in &outcome.lines {
                    println!("{line}");
                }
                for f in &outcome.files {
                    println!("wrote {}", f.display());
                }
            }
            if outcome.diverged {
                eprintln!("psmgd: at least one run diverged");
                EXIT_DIVERGED
            } else if outcome.failed {
                eprintln!("psmgd: self-test failed");
                EXIT_FAILURE
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            eprintln!("psmgd: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: Cli, overrides: &[(String, String)]) -> Result<CommandOutcome> {
    let mut map = match &cli.config {
        Some(path) => ConfigMap::read(path)?,
        None => ConfigMap::default(),
    };
    for (k, v) in overrides {
        map.set(k, v)?;
    }
    match &cli.command {
        Command::Pareto { starts: Some(k) } => map.set("pareto.starts", &k.to_string())?,
        Command::Rates { family: Some(f) } => map.set("rates.family", f)?,
        Command::Report { dir: Some(d) } => map.set("report.dir", &d.to_string_lossy())?,
        _ => {}
    }
    let seeds_configured = !cli.seeds.is_empty() || map.get("seeds").is_some();
    if !cli.seeds.is_empty() {
        let joined: Vec<String> = cli.seeds.iter().map(u64::to_string).collect();
        map.set("seeds", &joined.join(","))?;
    }
    if let Some(out) = &cli.out {
        map.set("output_dir", &out.to_string_lossy())?;
    }
    let mut cfg = ExperimentConfig::from_map(&map)?;

    match cli.command {
        Command::Run => cmd_run(&cfg),
        Command::Pareto { .. } => {
            if let Some(k) = cfg.pareto_starts {
                if k == 0 {
                    return Err(Error::config("pareto.starts", "need at least one start"));
                }
                let base = cfg.seeds[0];
                cfg.seeds = (0..k as u64).map(|i| base + i).collect();
            }
            cmd_pareto(&cfg)
        }
        Command::Rates { .. } => {
            let family: RateFamily = cfg
                .rates_family
                .ok_or_else(|| Error::config("rates.family", "choose sc, gc or nc"))?;
            let horizons = cfg
                .rates_horizons
                .clone()
                .unwrap_or_else(|| family.default_horizons());
            let seeds = if seeds_configured {
                cfg.seeds.clone()
            } else {
                (0..DEFAULT_RATE_SEEDS as u64).collect()
            };
            cmd_rates(&cfg, family, &horizons, &seeds)
        }
        Command::Bpsweep => cmd_bpsweep(&cfg),
        Command::Report { .. } => {
            let dir = cfg
                .report_dir
                .clone()
                .unwrap_or_else(|| cfg.output_dir.clone());
            cmd_report(&dir, &cfg.output_dir, cfg.report_baseline.as_deref())
        }
        Command::Selftest => cmd_selftest(cli.out.as_deref()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn overrides_are_extracted() {
        let (rest, ov) =
            split_overrides(&args("psmgd run --optimizer.R 4 --T=9 --quiet --seed 3")).unwrap();
        assert_eq!(rest, args("psmgd run --quiet --seed 3"));
        assert_eq!(
            ov,
            vec![("optimizer.R".into(), "4".into()), ("T".into(), "9".into())]
        );
        assert!(split_overrides(&args("psmgd run --sigma")).is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(main_with_args(&args("psmgd run --T 0 --quiet")), EXIT_USAGE);
        assert_eq!(main_with_args(&args("psmgd frobnicate")), EXIT_USAGE);
        assert_eq!(main_with_args(&args("psmgd rates --quiet")), EXIT_USAGE);
    }
}
