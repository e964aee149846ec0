//! Linear control systems on the three-dimensional solvable Lie groups
//! `G(θ) = ℝ ×_ρ ℝ²`: exact flows, rank conditions, control-set
//! classification, sampled reachable sets and constructive planners.

pub mod classify;
pub mod cli;
pub mod control;
pub mod covering;
pub mod error;
pub mod group;
pub mod integrate;
pub mod kernel2d;
pub mod plan;
pub mod planar;
pub mod reach;
pub mod system;

pub use control::{ControlRange, PiecewiseControl, Trajectory};
pub use error::{Error, Result};
pub use group::{GroupElement, GroupVariant, QuotientElement};
pub use kernel2d::{expm, lambda_op, rot90, theta_matrix, Mat2, ThetaFamily, Vec2};
pub use planar::PlanarSpec;
pub use system::{InvariantField, LinearField, SystemSpec};
