//! Step-size and momentum schedules.

use serde::Serialize;

use crate::error::{Error, Result};

/// Guard on the weight change in the adaptive non-convex momentum rule.
pub const DEFAULT_DELTA_GUARD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    /// `eta_t = eta`.
    Constant { eta: f64 },
    /// `eta_t = c / T` for the whole horizon.
    ConstantOverHorizon { c: f64, horizon: usize },
    /// `eta_t = eta0 / sqrt(t + 1)`.
    InverseSqrt { eta0: f64 },
}

impl StepSchedule {
    pub fn constant(eta: f64) -> Result<Self> {
        positive("step size", eta)?;
        Ok(StepSchedule::Constant { eta })
    }

    pub fn constant_over_horizon(c: f64, horizon: usize) -> Result<Self> {
        positive("step constant c", c)?;
        if horizon == 0 {
            return Err(Error::invalid(
                "constant_over_horizon needs a horizon T >= 1",
            ));
        }
        Ok(StepSchedule::ConstantOverHorizon { c, horizon })
    }

    pub fn inverse_sqrt(eta0: f64) -> Result<Self> {
        positive("initial step size", eta0)?;
        Ok(StepSchedule::InverseSqrt { eta0 })
    }

    pub fn eta_at(&self, t: usize) -> f64 {
        match *self {
            StepSchedule::Constant { eta } => eta,
            StepSchedule::ConstantOverHorizon { c, horizon } => c / horizon as f64,
            StepSchedule::InverseSqrt { eta0 } => eta0 / ((t + 1) as f64).sqrt(),
        }
    }

    /// `eta_0`, the anchor for the momentum rules.
    pub fn initial(&self) -> f64 {
        self.eta_at(0)
    }
}

pub fn eta_at(schedule: &StepSchedule, t: usize) -> f64 {
    schedule.eta_at(t)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MomentumSchedule {
    /// `alpha_t = alpha`.
    Fixed { alpha: f64 },
    /// `1 - alpha_t = min(1, eta_t / eta_0)`.
    EtaCoupled,
    /// `1 - alpha_t = min(eta_t / eta_0, eta_t / (eta_0 sqrt(max(t,1)) max(delta, guard)))`
    /// where `delta = max_s |fresh_s - anchor_s|`.
    NonconvexAdaptive { guard: f64 },
}

impl MomentumSchedule {
    pub fn fixed(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid(format!(
                "momentum must lie in [0, 1], got {alpha}"
            )));
        }
        Ok(MomentumSchedule::Fixed { alpha })
    }

    pub fn nonconvex_adaptive() -> Self {
        MomentumSchedule::NonconvexAdaptive {
            guard: DEFAULT_DELTA_GUARD,
        }
    }

    pub fn alpha_at(&self, ctx: &MomentumContext) -> f64 {
        let alpha = match *self {
            MomentumSchedule::Fixed { alpha } => alpha,
            MomentumSchedule::EtaCoupled => 1.0 - (ctx.eta_t / ctx.eta_0).min(1.0),
            MomentumSchedule::NonconvexAdaptive { guard } => {
                let base = ctx.eta_t / ctx.eta_0;
                let delta = ctx.weight_delta_max.max(guard);
                let damped = ctx.eta_t / (ctx.eta_0 * (ctx.t.max(1) as f64).sqrt() * delta);
                1.0 - base.min(damped)
            }
        };
        alpha.clamp(0.0, 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentumContext {
    pub t: usize,
    pub eta_t: f64,
    pub eta_0: f64,
    /// `max_s |fresh_s - anchor_s|` at the current recompute.
    pub weight_delta_max: f64,
}

pub fn alpha_at(schedule: &MomentumSchedule, ctx: &MomentumContext) -> f64 {
    schedule.alpha_at(ctx)
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} must be positive, got {v}")))
    }
}
