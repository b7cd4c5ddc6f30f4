#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod metrics;
pub mod optimizers;
pub mod problems;
pub mod rng;
pub mod runner;
pub mod simplex_qp;
pub mod types;

pub use error::{Error, Result};
pub use rng::RngStream;
pub use simplex_qp::{min_norm_point, project_simplex, two_vector_gamma, QpOptions, QpSolution};
pub use types::{
    weighted_direction, DecisionVector, GradientMatrix, OracleBudget, SimplexWeights, Trajectory,
    TrajectoryRecord,
};
