//! Synthetic event streams with analytic ground truth.
//!
//! A binary pattern is rasterized once into an anti-aliased texture, moved
//! along a piecewise-polynomial SE(2) trajectory and sampled per pixel at the
//! simulation rate. A pixel emits an event whenever its log intensity moved
//! by the contrast threshold since its last event; at most one event per
//! pixel and step.

mod pattern;
mod trajectory;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::Vec2;
use crate::patch::{Event, Polarity};
use crate::tracker::{FeatureTrack, Seed, TerminationReason, TrackSample};

pub use pattern::{Pattern, PatternKind, Texture, HIGH_INTENSITY, LOW_INTENSITY};
pub use trajectory::{Trajectory, TrajectorySegment};

/// Ground-truth sample rate (Hz).
pub const GROUND_TRUTH_RATE: f64 = 1000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid scene: {0}")]
    InvalidSpec(String),
    #[error("feature {index} at ({x}, {y}) leaves the sensor at t={t}")]
    TrajectoryExitsSensor { index: usize, x: f64, y: f64, t: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub pattern: PatternKind,
    /// Pattern lattice spacing (px).
    pub spacing: f64,
    pub width: u32,
    pub height: u32,
    pub trajectory: Trajectory,
    /// Contrast threshold `C` in log-intensity units.
    pub threshold: f64,
    pub duration: f64,
    /// Background noise events per pixel per second.
    pub noise_rate: f64,
    pub sim_rate: f64,
    pub seed: u64,
    /// Tracked features in world coordinates; empty selects the pattern's
    /// anchors that stay `feature_margin` inside the sensor.
    pub features: Vec<Vec2>,
    pub feature_margin: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            pattern: PatternKind::Star,
            spacing: 40.0,
            width: 240,
            height: 180,
            trajectory: Trajectory::default(),
            threshold: 0.15,
            duration: 1.0,
            noise_rate: 0.0,
            sim_rate: 10_000.0,
            seed: 0,
            features: Vec::new(),
            feature_margin: 16.0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidSpec(m.to_string()));
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return bad("threshold must be positive");
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad("duration must be positive");
        }
        if !(self.sim_rate > 0.0 && self.sim_rate.is_finite()) {
            return bad("sim_rate must be positive");
        }
        if !(self.spacing >= 4.0 && self.spacing.is_finite()) {
            return bad("spacing must be at least 4 px");
        }
        if self.width == 0 || self.height == 0 {
            return bad("sensor size must be nonzero");
        }
        if !(self.noise_rate >= 0.0 && self.noise_rate.is_finite()) {
            return bad("noise_rate must be non-negative");
        }
        if !(self.feature_margin >= 0.0) {
            return bad("feature_margin must be non-negative");
        }
        if self.trajectory.segments.is_empty() {
            return bad("trajectory has no segments");
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        (self.duration * self.sim_rate).round() as usize
    }

    fn step_time(&self, k: usize) -> f64 {
        k as f64 / self.sim_rate
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticOutput {
    /// Sorted by `(t, y, x)`.
    pub events: Vec<Event>,
    pub ground_truth: Vec<FeatureTrack>,
    /// Ground-truth positions at `t = 0`, one per track.
    pub seeds: Vec<Seed>,
}

/// Image-to-world transform per simulation step as `(cos, sin, tx, ty)`.
fn inverse_poses(spec: &SceneSpec) -> Vec<[f64; 4]> {
    (0..=spec.steps())
        .map(|k| {
            let inv = spec.trajectory.pose(spec.step_time(k)).inverse();
            let (s, c) = inv.angle.sin_cos();
            [c, s, inv.translation[0], inv.translation[1]]
        })
        .collect()
}

#[inline]
fn to_world(p: &[f64; 4], x: f64, y: f64) -> Vec2 {
    [p[0] * x - p[1] * y + p[2], p[1] * x + p[0] * y + p[3]]
}

fn ground_truth(spec: &SceneSpec) -> Result<(Vec<FeatureTrack>, Vec<Seed>), SynthError> {
    let n = (spec.duration * GROUND_TRUTH_RATE).round() as usize;
    let times: Vec<f64> = (0..=n).map(|k| k as f64 / GROUND_TRUTH_RATE).collect();
    let (w, h) = (spec.width as f64, spec.height as f64);
    let explicit = !spec.features.is_empty();
    let candidates = if explicit {
        spec.features.clone()
    } else {
        let inv = spec.trajectory.pose(0.0).inverse();
        let corners = [[0.0, 0.0], [w - 1.0, 0.0], [0.0, h - 1.0], [w - 1.0, h - 1.0]]
            .map(|c| inv.apply(c));
        let lo = [
            corners.iter().map(|c| c[0]).fold(f64::INFINITY, f64::min),
            corners.iter().map(|c| c[1]).fold(f64::INFINITY, f64::min),
        ];
        let hi = [
            corners.iter().map(|c| c[0]).fold(f64::NEG_INFINITY, f64::max),
            corners.iter().map(|c| c[1]).fold(f64::NEG_INFINITY, f64::max),
        ];
        Pattern::new(spec.pattern, spec.spacing, spec.seed).anchors(lo, hi)
    };
    let margin = if explicit { 0.0 } else { spec.feature_margin };
    let mut tracks = Vec::new();
    let mut seeds = Vec::new();
    for (index, p) in candidates.into_iter().enumerate() {
        let mut samples = Vec::with_capacity(times.len());
        let mut exit = None;
        for &t in &times {
            let pose = spec.trajectory.pose(t);
            let q = pose.apply(p);
            if q[0] < margin || q[1] < margin || q[0] > w - 1.0 - margin || q[1] > h - 1.0 - margin
            {
                exit = Some((q, t));
                break;
            }
            samples.push(TrackSample {
                t,
                position: q,
                angle: pose.angle,
            });
        }
        match exit {
            Some((q, t)) if explicit => {
                return Err(SynthError::TrajectoryExitsSensor {
                    index,
                    x: q[0],
                    y: q[1],
                    t,
                })
            }
            Some(_) => continue,
            None => {}
        }
        seeds.push(Seed::new(0.0, samples[0].position));
        tracks.push(FeatureTrack {
            id: tracks.len(),
            samples,
            termination: TerminationReason::EndOfStream,
        });
    }
    Ok((tracks, seeds))
}

fn simulate_row(
    spec: &SceneSpec,
    texture: &Texture,
    poses: &[[f64; 4]],
    y: u32,
) -> Vec<Event> {
    let c = spec.threshold;
    let yf = y as f64;
    let probe_stride = (poses.len() / 256).max(1);
    let mut out = Vec::new();
    for x in 0..spec.width {
        let xf = x as f64;
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in poses.iter().step_by(probe_stride).chain(poses.last()) {
            let w = to_world(p, xf, yf);
            for a in 0..2 {
                lo[a] = lo[a].min(w[a]);
                hi[a] = hi[a].max(w[a]);
            }
        }
        let pad = 2.0;
        if texture.is_flat([lo[0] - pad, lo[1] - pad], [hi[0] + pad, hi[1] + pad]) {
            continue;
        }
        let mut last_intensity = texture.sample(to_world(&poses[0], xf, yf));
        let mut level = last_intensity.ln();
        let mut log_i = level;
        for (k, p) in poses.iter().enumerate().skip(1) {
            let intensity = texture.sample(to_world(p, xf, yf));
            if intensity != last_intensity {
                last_intensity = intensity;
                log_i = intensity.ln();
            }
            let delta = log_i - level;
            let polarity = if delta >= c {
                level += c;
                Polarity::Positive
            } else if delta <= -c {
                level -= c;
                Polarity::Negative
            } else {
                continue;
            };
            out.push(Event::new(spec.step_time(k), [xf, yf], polarity));
        }
    }
    if spec.noise_rate > 0.0 {
        let exp = Exp::new(spec.noise_rate).expect("positive rate");
        let mut rng = ChaCha8Rng::seed_from_u64(
            spec.seed ^ (y as u64 + 1).wrapping_mul(0x2545_F491_4F6C_DD1D),
        );
        let steps = spec.steps();
        for x in 0..spec.width {
            let mut t = 0.0;
            loop {
                t += exp.sample(&mut rng);
                if t > spec.duration {
                    break;
                }
                let k = ((t * spec.sim_rate).round() as usize).clamp(1, steps.max(1));
                let polarity = if rng.gen_bool(0.5) {
                    Polarity::Positive
                } else {
                    Polarity::Negative
                };
                out.push(Event::new(spec.step_time(k), [x as f64, yf], polarity));
            }
        }
    }
    out
}

/// Renders the scene and emits its event stream and ground-truth tracks.
/// Output is a pure function of `spec` (including `spec.seed`).
pub fn generate(spec: &SceneSpec) -> Result<SyntheticOutput, SynthError> {
    spec.validate()?;
    let (ground_truth, seeds) = ground_truth(spec)?;
    let poses = inverse_poses(spec);

    let (w, h) = (spec.width as f64, spec.height as f64);
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &poses {
        for corner in [[0.0, 0.0], [w - 1.0, 0.0], [0.0, h - 1.0], [w - 1.0, h - 1.0]] {
            let q = to_world(p, corner[0], corner[1]);
            for a in 0..2 {
                lo[a] = lo[a].min(q[a]);
                hi[a] = hi[a].max(q[a]);
            }
        }
    }
    let pad = 4.0;
    let pattern = Pattern::new(spec.pattern, spec.spacing, spec.seed);
    let texture = Texture::render(&pattern, [lo[0] - pad, lo[1] - pad], [hi[0] + pad, hi[1] + pad]);

    let mut events: Vec<Event> = (0..spec.height)
        .into_par_iter()
        .map(|y| simulate_row(spec, &texture, &poses, y))
        .flatten()
        .collect();
    events.sort_by(|a, b| {
        a.t.total_cmp(&b.t)
            .then(a.x[1].total_cmp(&b.x[1]))
            .then(a.x[0].total_cmp(&b.x[0]))
    });
    Ok(SyntheticOutput {
        events,
        ground_truth,
        seeds,
    })
}

/// Same scene with a different seed.
pub fn generate_with_seed(spec: &SceneSpec, seed: u64) -> Result<SyntheticOutput, SynthError> {
    let mut s = spec.clone();
    s.seed = seed;
    generate(&s)
}
