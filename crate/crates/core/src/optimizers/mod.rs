//! Periodic stochastic multi-gradient descent and the reference optimizers
//! it is compared against.

mod run;
mod schedule;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::simplex_qp::{project_simplex, QpOptions};
use crate::types::SimplexWeights;

pub use run::{
    ls_run, mgda_run, psmgd_run, random_weights_run, run, sample_random_weights, smg_run,
    RunOptions,
};
pub use schedule::{
    alpha_at, eta_at, MomentumContext, MomentumSchedule, StepSchedule, DEFAULT_DELTA_GUARD,
};

/// Default reuse period.
pub const DEFAULT_PERIOD: usize = 8;
/// Default fixed momentum on the weights.
pub const DEFAULT_MOMENTUM: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Psmgd,
    Smg,
    Mgda,
    LinearScalarization,
    RandomWeights,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 5] = [
        OptimizerKind::Psmgd,
        OptimizerKind::Smg,
        OptimizerKind::Mgda,
        OptimizerKind::LinearScalarization,
        OptimizerKind::RandomWeights,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            OptimizerKind::Psmgd => "psmgd",
            OptimizerKind::Smg => "smg",
            OptimizerKind::Mgda => "mgda",
            OptimizerKind::LinearScalarization => "ls",
            OptimizerKind::RandomWeights => "random_weights",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "psmgd" => Ok(OptimizerKind::Psmgd),
            "smg" => Ok(OptimizerKind::Smg),
            "mgda" => Ok(OptimizerKind::Mgda),
            "ls" | "linear_scalarization" => Ok(OptimizerKind::LinearScalarization),
            "random_weights" | "rlw" => Ok(OptimizerKind::RandomWeights),
            other => Err(Error::invalid(format!("unknown optimizer kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    /// Weight recompute period `R`; only read by PSMGD.
    pub period: usize,
    /// Only read by linear scalarization.
    pub fixed_weights: Option<SimplexWeights>,
    pub step: StepSchedule,
    /// Only read by PSMGD.
    pub momentum: MomentumSchedule,
    pub qp: QpOptions,
}

impl OptimizerSpec {
    pub fn psmgd(period: usize, step: StepSchedule, momentum: MomentumSchedule) -> Result<Self> {
        Self {
            kind: OptimizerKind::Psmgd,
            period,
            fixed_weights: None,
            step,
            momentum,
            qp: QpOptions::default(),
        }
        .validated()
    }

    pub fn smg(step: StepSchedule) -> Self {
        Self::simple(OptimizerKind::Smg, step)
    }

    pub fn mgda(step: StepSchedule) -> Self {
        Self::simple(OptimizerKind::Mgda, step)
    }

    pub fn random_weights(step: StepSchedule) -> Self {
        Self::simple(OptimizerKind::RandomWeights, step)
    }

    pub fn linear_scalarization(weights: SimplexWeights, step: StepSchedule) -> Self {
        Self {
            fixed_weights: Some(weights),
            ..Self::simple(OptimizerKind::LinearScalarization, step)
        }
    }

    fn simple(kind: OptimizerKind, step: StepSchedule) -> Self {
        Self {
            kind,
            period: 1,
            fixed_weights: None,
            step,
            momentum: MomentumSchedule::Fixed { alpha: 0.0 },
            qp: QpOptions::default(),
        }
    }

    pub fn validated(self) -> Result<Self> {
        if self.period == 0 {
            return Err(Error::invalid("period R must be >= 1"));
        }
        if self.kind == OptimizerKind::LinearScalarization && self.fixed_weights.is_none() {
            return Err(Error::invalid("linear scalarization needs fixed weights"));
        }
        if let MomentumSchedule::Fixed { alpha } = self.momentum {
            MomentumSchedule::fixed(alpha)?;
        }
        Ok(self)
    }
}

/// `alpha * anchor + (1 - alpha) * fresh`, projected back onto the simplex
/// to absorb rounding.
pub fn mix_weights(
    anchor: &SimplexWeights,
    fresh: &SimplexWeights,
    alpha: f64,
) -> Result<SimplexWeights> {
    if anchor.len() != fresh.len() {
        return Err(Error::invalid(format!(
            "cannot mix weights of length {} and {}",
            anchor.len(),
            fresh.len()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    let mixed: Vec<f64> = anchor
        .as_slice()
        .iter()
        .zip(fresh.as_slice())
        .map(|(a, f)| alpha * a + (1.0 - alpha) * f)
        .collect();
    project_simplex(&mixed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(v: &[f64]) -> SimplexWeights {
        SimplexWeights::new(v.to_vec()).unwrap()
    }

    #[test]
    fn mix_examples() {
        let (a, f) = (w(&[1.0, 0.0]), w(&[0.0, 1.0]));
        assert_eq!(mix_weights(&a, &f, 0.0).unwrap().as_slice(), &[0.0, 1.0]);
        assert_eq!(mix_weights(&a, &f, 1.0).unwrap().as_slice(), &[1.0, 0.0]);
        let m = mix_weights(&a, &f, 0.9).unwrap();
        assert!((m.as_slice()[0] - 0.9).abs() < 1e-15);
        assert!((m.as_slice()[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn mix_rejects_mismatch() {
        assert!(mix_weights(&w(&[1.0]), &w(&[0.5, 0.5]), 0.5).is_err());
        assert!(mix_weights(&w(&[1.0]), &w(&[1.0]), 1.5).is_err());
    }

    #[test]
    fn kind_round_trips_through_strings() {
        for kind in OptimizerKind::ALL {
            assert_eq!(kind.as_str().parse::<OptimizerKind>().unwrap(), kind);
        }
        assert!("adam".parse::<OptimizerKind>().is_err());
    }

    #[test]
    fn spec_validation() {
        let step = StepSchedule::constant(0.1).unwrap();
        assert!(OptimizerSpec::psmgd(0, step, MomentumSchedule::fixed(0.9).unwrap()).is_err());
        let mut ls = OptimizerSpec::linear_scalarization(w(&[1.0]), step);
        ls.fixed_weights = None;
        assert!(ls.validated().is_err());
    }
}
