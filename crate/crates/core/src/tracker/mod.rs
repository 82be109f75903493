//! Sliding-window feature tracking.

mod config;
mod feature;
mod run;

use thiserror::Error;

pub use config::{ConfigError, LineSearchConfig, TrackerConfig};
pub use feature::{
    FeatureState, FeatureStats, FeatureStatus, FeatureTrack, OptimizeReport, TerminationReason,
    TrackSample,
};
pub use run::{run, FeatureSummary, RejectReason, RejectedSeed, RunOutput, Seed};

use crate::geometry::SplineError;
use crate::patch::PatchError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackerError {
    #[error("seed ({x}, {y}) is closer than the patch radius to the sensor border")]
    SeedOutOfBounds { x: f64, y: f64 },
    #[error("feature budget of {0} active features exhausted")]
    BudgetExhausted(usize),
    #[error("event at t={t} precedes the previous event at t={previous}")]
    NonMonotone { previous: f64, t: f64 },
    #[error("event stream is not time-sorted at index {index}")]
    UnsortedStream { index: usize },
    #[error("no seeds given")]
    NoSeeds,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error(transparent)]
    Patch(#[from] PatchError),
}
