use crate::geometry::{Se2Pose, Vec2};

/// Polynomial motion valid from `start` until the next segment begins.
/// Coefficients are in ascending powers of `t − start`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectorySegment {
    pub start: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub theta: Vec<f64>,
}

fn poly(c: &[f64], tau: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * tau + v)
}

/// Piecewise-polynomial planar motion of the scene.
///
/// A world point `P` appears in the image at
/// `pivot + R(θ(t))·(P − pivot) + offset(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub pivot: Vec2,
    /// Sorted by `start`; the first segment also covers earlier times.
    pub segments: Vec<TrajectorySegment>,
}

impl Default for Trajectory {
    fn default() -> Self {
        Self::constant_velocity([0.0, 0.0], 0.0, [0.0, 0.0])
    }
}

impl Trajectory {
    /// Uniform translation `velocity` (px/s) and rotation `omega` (rad/s)
    /// about `pivot`.
    pub fn constant_velocity(velocity: Vec2, omega: f64, pivot: Vec2) -> Self {
        Self {
            pivot,
            segments: vec![TrajectorySegment {
                start: 0.0,
                x: vec![0.0, velocity[0]],
                y: vec![0.0, velocity[1]],
                theta: vec![0.0, omega],
            }],
        }
    }

    fn segment_at(&self, t: f64) -> Option<&TrajectorySegment> {
        let idx = self.segments.partition_point(|s| s.start <= t);
        self.segments.get(idx.saturating_sub(1))
    }

    /// `(offset, θ)` at time `t`.
    pub fn motion(&self, t: f64) -> (Vec2, f64) {
        match self.segment_at(t) {
            Some(s) => {
                let tau = t - s.start;
                ([poly(&s.x, tau), poly(&s.y, tau)], poly(&s.theta, tau))
            }
            None => ([0.0, 0.0], 0.0),
        }
    }

    /// World-to-image pose at `t`.
    pub fn pose(&self, t: f64) -> Se2Pose {
        let (offset, theta) = self.motion(t);
        let rot = Se2Pose::from_angle(theta).apply(self.pivot);
        Se2Pose::new(
            [
                self.pivot[0] - rot[0] + offset[0],
                self.pivot[1] - rot[1] + offset[1],
            ],
            theta,
        )
    }
}
