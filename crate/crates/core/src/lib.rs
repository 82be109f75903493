//! Event-camera feature tracking along continuous-time SE(2) B-spline
//! trajectories.
//!
//! Each feature is tracked by warping its events back to the feature's start
//! time along a uniform B-spline and maximizing the variance (sharpness) of
//! the resulting patch image. Only the most recent knots are optimized; older
//! events are compressed into an exponentially decaying history patch.
//!
//! Modules:
//! - [`geometry`]: SE(2) poses and uniform B-splines.
//! - [`patch`]: event splatting, history patch, variance objective and gradient.
//! - [`tracker`]: per-feature sliding-window optimization and the batch driver.
//! - [`synthetic`]: ground-truth event stream generator.
//! - [`io`]: text formats for events, seeds, tracks, configs and scenes.
//! - [`eval`]: feature age and error metrics.

pub mod eval;
pub mod geometry;
pub mod io;
pub mod patch;
pub mod synthetic;
pub mod tracker;

pub use geometry::{Knot, Se2Pose, Se2Spline, Vec2};
pub use patch::{Event, Polarity};
pub use tracker::{run, FeatureTrack, Seed, TrackerConfig};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
