//! SE(2) rigid transforms and uniform B-spline trajectories.

mod se2;
mod spline;

pub use se2::{rotate_generator, wrap_angle, Se2Pose, Vec2, ROTATION_GENERATOR};
pub use spline::{
    basis_weights, knot_jacobian_weights, BasisMatrix, Knot, KnotWeights, Se2Spline, SplineError,
    MAX_ORDER,
};
