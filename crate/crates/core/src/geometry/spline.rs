//! Uniform B-splines over the knot space `(x, y, θ)`.
//!
//! Knots are blended as plain 3-vectors and the blended vector is read as an
//! SE(2) pose. Segment `j` covers `[t0 + j·Δt, t0 + (j+1)·Δt)` and is
//! controlled by knots `j..j+order`. The blending weights come from the
//! uniform basis matrix, so `∂B/∂k_i` is the scalar weight of knot `i` times
//! the 3×3 identity.

use std::ops::{Add, AddAssign, Mul, Sub};

use thiserror::Error;

use super::se2::Se2Pose;

/// Largest supported spline order (degree + 1).
pub const MAX_ORDER: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplineError {
    #[error("spline order {0} is not in 2..={MAX_ORDER}")]
    InvalidOrder(usize),
    #[error("segment parameter {0} is outside [0, 1)")]
    ParameterOutOfRange(f64),
    #[error("{knots} knots cannot support a spline of order {order}")]
    TooFewKnots { knots: usize, order: usize },
    #[error("knot interval {0} must be positive and finite")]
    InvalidInterval(f64),
    #[error("time {t} is outside the spline domain [{start}, {end}]")]
    OutsideDomain { t: f64, start: f64, end: f64 },
}

/// A spline control value `(x, y, θ)` in pixels, pixels, radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Knot {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Knot {
    pub const ZERO: Knot = Knot {
        x: 0.0,
        y: 0.0,
        theta: 0.0,
    };

    pub const fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.theta]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_pose(self) -> Se2Pose {
        Se2Pose::new([self.x, self.y], self.theta)
    }
}

impl Add for Knot {
    type Output = Knot;
    fn add(self, o: Knot) -> Knot {
        Knot::new(self.x + o.x, self.y + o.y, self.theta + o.theta)
    }
}

impl AddAssign for Knot {
    fn add_assign(&mut self, o: Knot) {
        self.x += o.x;
        self.y += o.y;
        self.theta += o.theta;
    }
}

impl Sub for Knot {
    type Output = Knot;
    fn sub(self, o: Knot) -> Knot {
        Knot::new(self.x - o.x, self.y - o.y, self.theta - o.theta)
    }
}

impl Mul<f64> for Knot {
    type Output = Knot;
    fn mul(self, s: f64) -> Knot {
        Knot::new(self.x * s, self.y * s, self.theta * s)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Polynomial coefficients of the uniform B-spline blending functions.
///
/// Row `s` holds the coefficients (ascending powers of `u`) of the weight of
/// the `s`-th knot of a segment.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    order: usize,
    coeffs: [[f64; MAX_ORDER]; MAX_ORDER],
}

impl BasisMatrix {
    pub fn new(order: usize) -> Result<Self, SplineError> {
        if !(2..=MAX_ORDER).contains(&order) {
            return Err(SplineError::InvalidOrder(order));
        }
        let k = order;
        let fact: f64 = (1..k).map(|v| v as f64).product();
        let mut coeffs = [[0.0; MAX_ORDER]; MAX_ORDER];
        for (s, row) in coeffs.iter_mut().enumerate().take(k) {
            for (n, c) in row.iter_mut().enumerate().take(k) {
                let mut sum = 0.0;
                for l in s..k {
                    let sign = if (l - s) % 2 == 0 { 1.0 } else { -1.0 };
                    let base = (k - 1 - l) as f64;
                    sum += sign * binomial(k, l - s) * base.powi((k - 1 - n) as i32);
                }
                *c = binomial(k - 1, n) * sum / fact;
            }
        }
        Ok(Self { order, coeffs })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Weights at `u`; accepts the closed interval so the domain end can be
    /// evaluated as the `u → 1` limit of the last segment.
    #[inline]
    pub fn weights(&self, u: f64) -> [f64; MAX_ORDER] {
        let k = self.order;
        let mut w = [0.0; MAX_ORDER];
        for (s, ws) in w.iter_mut().enumerate().take(k) {
            // Horner on the ascending coefficient row.
            let row = &self.coeffs[s];
            let mut acc = 0.0;
            for n in (0..k).rev() {
                acc = acc * u + row[n];
            }
            *ws = acc;
        }
        w
    }
}

/// Blending weights of the `order` knots controlling a segment at `u ∈ [0, 1)`.
pub fn basis_weights(u: f64, order: usize) -> Result<Vec<f64>, SplineError> {
    let m = BasisMatrix::new(order)?;
    if !(0.0..1.0).contains(&u) {
        return Err(SplineError::ParameterOutOfRange(u));
    }
    Ok(m.weights(u)[..order].to_vec())
}

/// Nonzero knot weights at one time: knot `first + i` has weight `values[i]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnotWeights {
    pub first: usize,
    pub len: usize,
    pub values: [f64; MAX_ORDER],
}

impl KnotWeights {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values[..self.len]
            .iter()
            .enumerate()
            .map(move |(i, &w)| (self.first + i, w))
    }

    pub fn get(&self, knot: usize) -> f64 {
        if knot >= self.first && knot < self.first + self.len {
            self.values[knot - self.first]
        } else {
            0.0
        }
    }
}

/// Uniform B-spline producing an SE(2) pose at any time in its domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Se2Spline {
    knots: Vec<Knot>,
    knot_interval: f64,
    t0: f64,
    basis: BasisMatrix,
}

impl Se2Spline {
    pub fn new(
        order: usize,
        t0: f64,
        knot_interval: f64,
        knots: Vec<Knot>,
    ) -> Result<Self, SplineError> {
        let basis = BasisMatrix::new(order)?;
        if !(knot_interval.is_finite() && knot_interval > 0.0) {
            return Err(SplineError::InvalidInterval(knot_interval));
        }
        if knots.len() < order {
            return Err(SplineError::TooFewKnots {
                knots: knots.len(),
                order,
            });
        }
        Ok(Self {
            knots,
            knot_interval,
            t0,
            basis,
        })
    }

    /// `order` identical knots: a single-segment constant spline.
    pub fn constant(
        order: usize,
        t0: f64,
        knot_interval: f64,
        value: Knot,
    ) -> Result<Self, SplineError> {
        Self::new(order, t0, knot_interval, vec![value; order])
    }

    pub fn order(&self) -> usize {
        self.basis.order
    }

    pub fn knot_interval(&self) -> f64 {
        self.knot_interval
    }

    pub fn start_time(&self) -> f64 {
        self.t0
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    pub fn knots_mut(&mut self) -> &mut [Knot] {
        &mut self.knots
    }

    pub fn num_knots(&self) -> usize {
        self.knots.len()
    }

    pub fn num_segments(&self) -> usize {
        self.knots.len() + 1 - self.order()
    }

    pub fn end_time(&self) -> f64 {
        self.segment_start(self.num_segments())
    }

    /// Start time of segment `j` (also the `j`-th knot time).
    pub fn segment_start(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.knot_interval
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t0 && t <= self.end_time()
    }

    /// Segment index and normalized parameter of `t`.
    pub fn locate(&self, t: f64) -> Result<(usize, f64), SplineError> {
        let end = self.end_time();
        if !(t >= self.t0 && t <= end) {
            return Err(SplineError::OutsideDomain {
                t,
                start: self.t0,
                end,
            });
        }
        let s = (t - self.t0) / self.knot_interval;
        let last = self.num_segments() - 1;
        let j = (s.floor() as usize).min(last);
        let u = (s - j as f64).clamp(0.0, 1.0);
        Ok((j, u))
    }

    /// `λ_i(t)`: the weight of every knot supporting `t`, i.e. `∂B/∂k_i`
    /// per component.
    pub fn knot_weights(&self, t: f64) -> Result<KnotWeights, SplineError> {
        let (j, u) = self.locate(t)?;
        Ok(KnotWeights {
            first: j,
            len: self.order(),
            values: self.basis.weights(u),
        })
    }

    /// Blended knot vector at `t`.
    #[inline]
    pub fn evaluate_params(&self, t: f64) -> Result<Knot, SplineError> {
        let w = self.knot_weights(t)?;
        Ok(self.blend(&w))
    }

    #[inline]
    pub fn blend(&self, w: &KnotWeights) -> Knot {
        let mut acc = Knot::ZERO;
        for (i, wi) in w.iter() {
            acc += self.knots[i] * wi;
        }
        acc
    }

    pub fn evaluate(&self, t: f64) -> Result<Se2Pose, SplineError> {
        Ok(self.evaluate_params(t)?.to_pose())
    }

    pub fn append_knot(&mut self, value: Knot) {
        self.knots.push(value);
    }

    pub fn with_knot(&self, value: Knot) -> Self {
        let mut s = self.clone();
        s.append_knot(value);
        s
    }

    /// Constant-velocity continuation `2·k_last − k_prev`, or a copy of the
    /// last knot when there is only one.
    pub fn extrapolated_knot(&self) -> Knot {
        let n = self.knots.len();
        match n {
            0 => Knot::ZERO,
            1 => self.knots[0],
            _ => self.knots[n - 1] * 2.0 - self.knots[n - 2],
        }
    }
}

/// Knot weights as a dense map over all knots.
pub fn knot_jacobian_weights(
    spline: &Se2Spline,
    t: f64,
) -> Result<Vec<(usize, f64)>, SplineError> {
    Ok(spline.knot_weights(t)?.iter().collect())
}
