use std::f64::consts::PI;

/// Planar point or vector in pixels.
pub type Vec2 = [f64; 2];

/// Infinitesimal rotation generator `[[0, -1], [1, 0]]`.
pub const ROTATION_GENERATOR: [[f64; 2]; 2] = [[0.0, -1.0], [1.0, 0.0]];

/// Rigid planar transform `x -> R(angle) x + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Se2Pose {
    pub translation: Vec2,
    pub angle: f64,
}

impl Se2Pose {
    pub const IDENTITY: Se2Pose = Se2Pose {
        translation: [0.0, 0.0],
        angle: 0.0,
    };

    pub fn new(translation: Vec2, angle: f64) -> Self {
        Self { translation, angle }
    }

    pub fn from_translation(translation: Vec2) -> Self {
        Self::new(translation, 0.0)
    }

    pub fn from_angle(angle: f64) -> Self {
        Self::new([0.0, 0.0], angle)
    }

    pub fn rotation(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.angle.sin_cos();
        [[c, -s], [s, c]]
    }

    #[inline]
    pub fn apply(&self, p: Vec2) -> Vec2 {
        let (s, c) = self.angle.sin_cos();
        [
            c * p[0] - s * p[1] + self.translation[0],
            s * p[0] + c * p[1] + self.translation[1],
        ]
    }

    pub fn inverse(&self) -> Self {
        let (s, c) = self.angle.sin_cos();
        let [tx, ty] = self.translation;
        Self {
            translation: [-(c * tx + s * ty), s * tx - c * ty],
            angle: -self.angle,
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Se2Pose) -> Self {
        let t = self.apply(other.translation);
        Self {
            translation: t,
            angle: self.angle + other.angle,
        }
    }

    /// Angle mapped into `(-π, π]`.
    pub fn wrapped_angle(&self) -> f64 {
        wrap_angle(self.angle)
    }
}

/// Maps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

#[inline]
pub fn rotate_generator(v: Vec2) -> Vec2 {
    [-v[1], v[0]]
}
