use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::geometry::Vec2;

/// Dark background intensity.
pub const LOW_INTENSITY: f64 = 0.1;
/// Bright foreground intensity.
pub const HIGH_INTENSITY: f64 = 1.0;

const SUPERSAMPLE: usize = 2;

/// Texels per pixel along each axis. Together with bilinear sampling this
/// gives edges a ramp of about half a pixel; much wider ramps spread each
/// pixel's event burst over a distance comparable to the motion inside one
/// knot interval, which biases variance maximization towards slower motion.
pub const TEXELS_PER_PIXEL: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternKind {
    Star,
    Checkerboard,
    RandomBlobs,
}

impl PatternKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PatternKind::Star => "star",
            PatternKind::Checkerboard => "checkerboard",
            PatternKind::RandomBlobs => "random_blobs",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "star" => Some(PatternKind::Star),
            "checkerboard" => Some(PatternKind::Checkerboard),
            "random_blobs" => Some(PatternKind::RandomBlobs),
            _ => None,
        }
    }
}

/// An infinite binary world pattern tiled on a square lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub kind: PatternKind,
    /// Lattice spacing (px).
    pub spacing: f64,
    pub seed: u64,
}

impl Pattern {
    pub fn new(kind: PatternKind, spacing: f64, seed: u64) -> Self {
        Self { kind, spacing, seed }
    }

    fn cell(&self, p: Vec2) -> (i64, i64) {
        (
            (p[0] / self.spacing).floor() as i64,
            (p[1] / self.spacing).floor() as i64,
        )
    }

    fn cell_center(&self, c: (i64, i64)) -> Vec2 {
        [
            (c.0 as f64 + 0.5) * self.spacing,
            (c.1 as f64 + 0.5) * self.spacing,
        ]
    }

    fn blob(&self, c: (i64, i64)) -> (Vec2, f64) {
        let mix = self
            .seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            ^ (c.0 as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9)
            ^ (c.1 as u64).wrapping_mul(0x94D0_49BB_1331_11EB);
        let mut rng = ChaCha8Rng::seed_from_u64(mix);
        let jx: f64 = rng.gen_range(0.35..0.65);
        let jy: f64 = rng.gen_range(0.35..0.65);
        let r: f64 = rng.gen_range(0.15..0.3);
        (
            [
                (c.0 as f64 + jx) * self.spacing,
                (c.1 as f64 + jy) * self.spacing,
            ],
            r * self.spacing,
        )
    }

    /// Whether `p` lies on the bright part of the pattern.
    pub fn inside(&self, p: Vec2) -> bool {
        let c = self.cell(p);
        match self.kind {
            PatternKind::Star => {
                let center = self.cell_center(c);
                inside_star(
                    [p[0] - center[0], p[1] - center[1]],
                    0.35 * self.spacing,
                    0.14 * self.spacing,
                )
            }
            PatternKind::Checkerboard => (c.0 + c.1).rem_euclid(2) == 0,
            PatternKind::RandomBlobs => {
                let (center, r) = self.blob(c);
                (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2) <= r * r
            }
        }
    }

    /// Anti-aliased intensity of the square texel of side `size` centered
    /// at `p`.
    pub fn texel(&self, p: Vec2, size: f64) -> f64 {
        let n = SUPERSAMPLE;
        let mut hits = 0;
        for sy in 0..n {
            for sx in 0..n {
                let q = [
                    p[0] + size * ((sx as f64 + 0.5) / n as f64 - 0.5),
                    p[1] + size * ((sy as f64 + 0.5) / n as f64 - 0.5),
                ];
                if self.inside(q) {
                    hits += 1;
                }
            }
        }
        let cover = hits as f64 / (n * n) as f64;
        LOW_INTENSITY + (HIGH_INTENSITY - LOW_INTENSITY) * cover
    }

    /// Natural feature locations within `[lo, hi]` (world coordinates).
    pub fn anchors(&self, lo: Vec2, hi: Vec2) -> Vec<Vec2> {
        let s = self.spacing;
        let (c0, c1) = (self.cell(lo), self.cell(hi));
        let mut out = Vec::new();
        for j in c0.1..=c1.1 {
            for i in c0.0..=c1.0 {
                let p = match self.kind {
                    PatternKind::Star => self.cell_center((i, j)),
                    PatternKind::Checkerboard => [i as f64 * s, j as f64 * s],
                    PatternKind::RandomBlobs => self.blob((i, j)).0,
                };
                if p[0] >= lo[0] && p[0] <= hi[0] && p[1] >= lo[1] && p[1] <= hi[1] {
                    out.push(p);
                }
            }
        }
        out
    }
}

fn inside_star(q: Vec2, outer: f64, inner: f64) -> bool {
    let verts: Vec<Vec2> = (0..10)
        .map(|k| {
            let a = -PI / 2.0 + k as f64 * PI / 5.0;
            let r = if k % 2 == 0 { outer } else { inner };
            [r * a.cos(), r * a.sin()]
        })
        .collect();
    let mut inside = false;
    let mut j = verts.len() - 1;
    for i in 0..verts.len() {
        let (a, b) = (verts[i], verts[j]);
        if (a[1] > q[1]) != (b[1] > q[1]) {
            let x = a[0] + (q[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if q[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// A rasterized window of the pattern, [`TEXELS_PER_PIXEL`] texels per
/// world pixel along each axis.
#[derive(Debug, Clone)]
pub struct Texture {
    origin: Vec2,
    scale: f64,
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Texture {
    /// Rasterizes `pattern` over `[lo, hi]`; texel `(i, j)` is centered at
    /// `origin + (i, j) / TEXELS_PER_PIXEL`.
    pub fn render(pattern: &Pattern, lo: Vec2, hi: Vec2) -> Self {
        let scale = TEXELS_PER_PIXEL as f64;
        let origin = [lo[0].floor(), lo[1].floor()];
        let width = ((hi[0].ceil() - origin[0]) * scale) as usize + 1;
        let height = ((hi[1].ceil() - origin[1]) * scale) as usize + 1;
        let size = 1.0 / scale;
        let data = (0..height)
            .into_par_iter()
            .flat_map_iter(|j| {
                (0..width).map(move |i| {
                    pattern.texel([origin[0] + i as f64 * size, origin[1] + j as f64 * size], size)
                })
            })
            .collect();
        Self {
            origin,
            scale,
            width,
            height,
            data,
        }
    }

    #[inline]
    fn at(&self, i: i64, j: i64) -> f64 {
        if i < 0 || j < 0 || i >= self.width as i64 || j >= self.height as i64 {
            LOW_INTENSITY
        } else {
            self.data[j as usize * self.width + i as usize]
        }
    }

    /// Bilinearly interpolated intensity at world point `p`.
    #[inline]
    pub fn sample(&self, p: Vec2) -> f64 {
        let u = (p[0] - self.origin[0]) * self.scale;
        let v = (p[1] - self.origin[1]) * self.scale;
        let (fu, fv) = (u.floor(), v.floor());
        let (i, j) = (fu as i64, fv as i64);
        let (a, b) = (u - fu, v - fv);
        let top = self.at(i, j) * (1.0 - a) + self.at(i + 1, j) * a;
        let bottom = self.at(i, j + 1) * (1.0 - a) + self.at(i + 1, j + 1) * a;
        top * (1.0 - b) + bottom * b
    }

    /// Whether every texel touched by bilinear sampling inside `[lo, hi]`
    /// has the same value.
    pub fn is_flat(&self, lo: Vec2, hi: Vec2) -> bool {
        let s = self.scale;
        let i0 = ((lo[0] - self.origin[0]) * s).floor() as i64 - 1;
        let j0 = ((lo[1] - self.origin[1]) * s).floor() as i64 - 1;
        let i1 = ((hi[0] - self.origin[0]) * s).ceil() as i64 + 1;
        let j1 = ((hi[1] - self.origin[1]) * s).ceil() as i64 + 1;
        let first = self.at(i0, j0);
        (j0..=j1).all(|j| (i0..=i1).all(|i| self.at(i, j) == first))
    }
}
