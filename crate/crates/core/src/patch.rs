//! Per-feature patch images built from motion-compensated events.
//!
//! Events are warped into the feature's reference frame by the spline pose
//! at their timestamp and splatted with a bilinear (tent) kernel into a d×d
//! grid. The sharpness objective is the variance of the patch image plus the
//! decayed history patch, taken over the pixels inside the circular mask.

use std::ops::Range;

use thiserror::Error;

use crate::geometry::{rotate_generator, Knot, Se2Spline, SplineError, Vec2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PatchError {
    #[error("patch diameter {0} must be odd and at least 3")]
    InvalidDiameter(usize),
    #[error("patch grids have different diameters ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("no optimizable knots")]
    EmptyOptimizableSet,
    #[error("optimizable knots {start}..{end} are not a suffix of {num_knots} knots")]
    InvalidOptimizableSet {
        start: usize,
        end: usize,
        num_knots: usize,
    },
    #[error("decay {0} is outside [0, 1]")]
    InvalidDecay(f64),
    #[error(transparent)]
    Spline(#[from] SplineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Negative,
    Positive,
}

impl Polarity {
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Negative => -1.0,
            Polarity::Positive => 1.0,
        }
    }
}

/// A single pixel brightness-change event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    /// Seconds.
    pub t: f64,
    /// Pixel coordinates.
    pub x: Vec2,
    pub polarity: Polarity,
}

impl Event {
    pub fn new(t: f64, x: Vec2, polarity: Polarity) -> Self {
        Self { t, x, polarity }
    }
}

/// Bilinear kernel `max(0, 1-|a₁-b₁|)·max(0, 1-|a₂-b₂|)`.
#[inline]
pub fn bilinear_kernel(a: Vec2, b: Vec2) -> f64 {
    tent(a[0] - b[0]) * tent(a[1] - b[1])
}

#[inline]
fn tent(d: f64) -> f64 {
    (1.0 - d.abs()).max(0.0)
}

/// `∂ tent(p − c) / ∂c` for `d = p − c`, averaging the one-sided slopes at
/// the kinks (`d = 0` and `|d| = 1`).
#[inline]
fn tent_slope(d: f64) -> f64 {
    let a = d.abs();
    if a >= 1.0 {
        if a == 1.0 {
            0.5 * d.signum()
        } else {
            0.0
        }
    } else if d == 0.0 {
        0.0
    } else {
        d.signum()
    }
}

/// `x' = B(t)·x`.
#[inline]
pub fn warp_event(spline: &Se2Spline, event: &Event) -> Result<Vec2, SplineError> {
    Ok(spline.evaluate(event.t)?.apply(event.x))
}

/// Membership test `‖B(t)·x − center‖ < radius`.
pub fn in_patch(
    spline: &Se2Spline,
    event: &Event,
    center: Vec2,
    radius: f64,
) -> Result<bool, SplineError> {
    let w = warp_event(spline, event)?;
    Ok(dist2(w, center) < radius * radius)
}

#[inline]
pub(crate) fn dist2(a: Vec2, b: Vec2) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Whether grid pixel `(i, j)` lies in the circular mask of a `d`-diameter patch.
#[inline]
pub fn in_mask(diameter: usize, i: usize, j: usize) -> bool {
    let h = ((diameter - 1) / 2) as i64;
    let (di, dj) = (i as i64 - h, j as i64 - h);
    di * di + dj * dj <= h * h
}

/// Number of masked pixels (`N` in the variance).
pub fn mask_len(diameter: usize) -> usize {
    (0..diameter)
        .flat_map(|j| (0..diameter).map(move |i| (i, j)))
        .filter(|&(i, j)| in_mask(diameter, i, j))
        .count()
}

/// A d×d reference-frame image centered on the feature. Pixel `(0, 0)` is the
/// top-left corner; `center` maps to pixel `((d−1)/2, (d−1)/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    diameter: usize,
    center: Vec2,
    reference_time: f64,
    values: Vec<f64>,
}

impl PatchGrid {
    pub fn new(diameter: usize, center: Vec2, reference_time: f64) -> Result<Self, PatchError> {
        if diameter < 3 || diameter % 2 == 0 {
            return Err(PatchError::InvalidDiameter(diameter));
        }
        Ok(Self {
            diameter,
            center,
            reference_time,
            values: vec![0.0; diameter * diameter],
        })
    }

    pub fn diameter(&self) -> usize {
        self.diameter
    }

    pub fn radius(&self) -> f64 {
        ((self.diameter - 1) / 2) as f64
    }

    pub fn center(&self) -> Vec2 {
        self.center
    }

    pub fn reference_time(&self) -> f64 {
        self.reference_time
    }

    /// Row-major values, `values[j * d + i]`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.diameter + i]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn same_shape(&self, other: &PatchGrid) -> Result<(), PatchError> {
        if self.diameter != other.diameter {
            return Err(PatchError::DimensionMismatch(self.diameter, other.diameter));
        }
        Ok(())
    }

    /// Continuous grid coordinates of a reference-frame point.
    #[inline]
    pub fn to_grid(&self, p: Vec2) -> Vec2 {
        let h = self.radius();
        [p[0] - self.center[0] + h, p[1] - self.center[1] + h]
    }

    /// Adds `weight · k_b(pixel, c)` at every in-grid pixel; mass falling
    /// outside the grid is dropped.
    #[inline]
    pub fn splat(&mut self, c: Vec2, weight: f64) {
        let d = self.diameter as i64;
        let (fx, fy) = (c[0].floor(), c[1].floor());
        let (ix0, iy0) = (fx as i64, fy as i64);
        for iy in iy0..=iy0 + 1 {
            if iy < 0 || iy >= d {
                continue;
            }
            let ky = tent(iy as f64 - c[1]);
            if ky == 0.0 {
                continue;
            }
            for ix in ix0..=ix0 + 1 {
                if ix < 0 || ix >= d {
                    continue;
                }
                let kx = tent(ix as f64 - c[0]);
                if kx != 0.0 {
                    self.values[(iy * d + ix) as usize] += weight * kx * ky;
                }
            }
        }
    }
}

/// Exponentially decayed accumulation of past segment images.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryPatch {
    image: PatchGrid,
    decay: f64,
    folded_until: Option<f64>,
}

impl HistoryPatch {
    /// Zero history (`H_{t0} = 0`).
    pub fn new(diameter: usize, center: Vec2, reference_time: f64, decay: f64) -> Result<Self, PatchError> {
        if !(0.0..=1.0).contains(&decay) {
            return Err(PatchError::InvalidDecay(decay));
        }
        Ok(Self {
            image: PatchGrid::new(diameter, center, reference_time)?,
            decay,
            folded_until: None,
        })
    }

    pub fn image(&self) -> &PatchGrid {
        &self.image
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn folded_until(&self) -> Option<f64> {
        self.folded_until
    }

    /// `H ← I_segment + ρ·H`.
    pub fn fold(&mut self, segment_image: &PatchGrid, until: f64) -> Result<(), PatchError> {
        self.image.same_shape(segment_image)?;
        let rho = self.decay;
        for (h, s) in self.image.values.iter_mut().zip(&segment_image.values) {
            *h = s + rho * *h;
        }
        self.folded_until = Some(until);
        Ok(())
    }
}

/// Functional form of [`HistoryPatch::fold`].
pub fn fold_history(
    history: &HistoryPatch,
    segment_image: &PatchGrid,
    until: f64,
) -> Result<HistoryPatch, PatchError> {
    let mut h = history.clone();
    h.fold(segment_image, until)?;
    Ok(h)
}

/// `I* = I_active + H`.
pub fn modified_image(active: &PatchGrid, history: &HistoryPatch) -> Result<PatchGrid, PatchError> {
    active.same_shape(&history.image)?;
    let mut out = active.clone();
    for (o, h) in out.values.iter_mut().zip(&history.image.values) {
        *o += h;
    }
    Ok(out)
}

/// Splats every event with `t ∈ [interval.0, interval.1)` that passes the
/// membership test into `grid`. Returns the number of splatted events.
pub fn accumulate(
    events: &[Event],
    spline: &Se2Spline,
    interval: (f64, f64),
    grid: &mut PatchGrid,
    signed_polarity: bool,
) -> Result<usize, SplineError> {
    let (t_begin, t_end) = interval;
    for t in [t_begin, t_end] {
        if !spline.contains(t) {
            return Err(SplineError::OutsideDomain {
                t,
                start: spline.start_time(),
                end: spline.end_time(),
            });
        }
    }
    let r2 = grid.radius() * grid.radius();
    let center = grid.center();
    let mut n = 0;
    for e in events.iter().filter(|e| e.t >= t_begin && e.t < t_end) {
        let w = warp_event(spline, e)?;
        if dist2(w, center) >= r2 {
            continue;
        }
        let weight = if signed_polarity { e.polarity.sign() } else { 1.0 };
        let c = grid.to_grid(w);
        grid.splat(c, weight);
        n += 1;
    }
    Ok(n)
}

/// Splats events without the membership test (events are assumed already
/// filtered against the current spline).
pub fn splat_events(
    events: &[Event],
    spline: &Se2Spline,
    grid: &mut PatchGrid,
    signed_polarity: bool,
) -> Result<(), SplineError> {
    for e in events {
        let w = warp_event(spline, e)?;
        let weight = if signed_polarity { e.polarity.sign() } else { 1.0 };
        let c = grid.to_grid(w);
        grid.splat(c, weight);
    }
    Ok(())
}

/// Variance over the masked pixels.
pub fn variance(grid: &PatchGrid) -> f64 {
    let mask = mask_indices(grid.diameter);
    let n = mask.len() as f64;
    let mean = mask.iter().map(|&i| grid.values[i]).sum::<f64>() / n;
    mask.iter()
        .map(|&i| (grid.values[i] - mean).powi(2))
        .sum::<f64>()
        / n
}

/// Objective value and gradient w.r.t. the optimizable knots.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveGradient {
    pub value: f64,
    /// Index of the knot `gradient[0]` belongs to.
    pub first_knot: usize,
    pub gradient: Vec<Knot>,
}

/// `σ*(I_active + H)` for events splatted under `spline`.
pub fn objective_value(
    events: &[Event],
    spline: &Se2Spline,
    history: &HistoryPatch,
    signed_polarity: bool,
) -> Result<f64, SplineError> {
    let mut img = history.image.clone();
    splat_events(events, spline, &mut img, signed_polarity)?;
    Ok(variance(&img))
}

/// Row-major indices of the masked pixels.
pub fn mask_indices(diameter: usize) -> Vec<usize> {
    (0..diameter)
        .flat_map(|j| (0..diameter).map(move |i| (i, j)))
        .filter(|&(i, j)| in_mask(diameter, i, j))
        .map(|(i, j)| j * diameter + i)
        .collect()
}

#[derive(Debug, Clone)]
struct WindowEvent {
    x: Vec2,
    weight: f64,
    /// Blend of the knots outside the optimizable range.
    fixed: Knot,
    /// First optimizable knot touching this event, relative to the range.
    first: usize,
    len: usize,
    lambda: [f64; crate::geometry::MAX_ORDER],
}

/// The objective restricted to one set of events and one suffix of
/// optimizable knots, with everything that does not depend on those knots
/// precomputed. Evaluations take the optimizable knots directly.
#[derive(Debug, Clone)]
pub struct WindowObjective {
    base: PatchGrid,
    optimizable: Range<usize>,
    events: Vec<WindowEvent>,
    mask: Vec<usize>,
}

impl WindowObjective {
    /// `optimizable` must be a non-empty suffix of the spline's knots; the
    /// other knots are frozen at their current values.
    pub fn new(
        events: &[Event],
        spline: &Se2Spline,
        optimizable: Range<usize>,
        history: &HistoryPatch,
        signed_polarity: bool,
    ) -> Result<Self, PatchError> {
        if optimizable.is_empty() {
            return Err(PatchError::EmptyOptimizableSet);
        }
        let num_knots = spline.num_knots();
        if optimizable.end != num_knots {
            return Err(PatchError::InvalidOptimizableSet {
                start: optimizable.start,
                end: optimizable.end,
                num_knots,
            });
        }
        let knots = spline.knots();
        let mut prepared = Vec::with_capacity(events.len());
        for e in events {
            let kw = spline.knot_weights(e.t)?;
            let mut fixed = Knot::ZERO;
            let mut lambda = [0.0; crate::geometry::MAX_ORDER];
            let mut first = usize::MAX;
            let mut len = 0;
            for (i, w) in kw.iter() {
                if i < optimizable.start {
                    fixed += knots[i] * w;
                } else {
                    if first == usize::MAX {
                        first = i - optimizable.start;
                    }
                    lambda[len] = w;
                    len += 1;
                }
            }
            prepared.push(WindowEvent {
                x: e.x,
                weight: if signed_polarity { e.polarity.sign() } else { 1.0 },
                fixed,
                first: if len == 0 { 0 } else { first },
                len,
                lambda,
            });
        }
        let d = history.image.diameter;
        Ok(Self {
            base: history.image.clone(),
            optimizable,
            events: prepared,
            mask: mask_indices(d),
        })
    }

    pub fn optimizable(&self) -> Range<usize> {
        self.optimizable.clone()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    #[inline]
    fn params(&self, e: &WindowEvent, knots: &[Knot]) -> Knot {
        let mut k = e.fixed;
        for (l, c) in e.lambda[..e.len].iter().zip(&knots[e.first..e.first + e.len]) {
            k += *c * *l;
        }
        k
    }

    fn check(&self, knots: &[Knot]) {
        assert_eq!(
            knots.len(),
            self.optimizable.len(),
            "expected one knot per optimizable index"
        );
    }

    fn masked_mean(&self, img: &PatchGrid) -> f64 {
        self.mask.iter().map(|&i| img.values[i]).sum::<f64>() / self.mask.len() as f64
    }

    /// `σ*` with the optimizable knots set to `knots`.
    pub fn value(&self, knots: &[Knot]) -> f64 {
        self.check(knots);
        let mut img = self.base.clone();
        for e in &self.events {
            let xw = self.params(e, knots).to_pose().apply(e.x);
            let c = img.to_grid(xw);
            img.splat(c, e.weight);
        }
        let mean = self.masked_mean(&img);
        self.mask
            .iter()
            .map(|&i| (img.values[i] - mean).powi(2))
            .sum::<f64>()
            / self.mask.len() as f64
    }

    /// `σ*` and its gradient with respect to the optimizable knots.
    ///
    /// The chain is `∂k_b/∂x' · ∂x'/∂(p, θ) · λ_i`, with `∂x'/∂p = I` and
    /// `∂x'/∂θ = σ_x (x' − p)` for `x' = R(θ)x + p`.
    pub fn value_and_gradient(&self, knots: &[Knot]) -> ObjectiveGradient {
        self.check(knots);
        let mut img = self.base.clone();
        let mut warped = Vec::with_capacity(self.events.len());
        for e in &self.events {
            let pose = self.params(e, knots).to_pose();
            let xw = pose.apply(e.x);
            let c = img.to_grid(xw);
            img.splat(c, e.weight);
            warped.push((c, [xw[0] - pose.translation[0], xw[1] - pose.translation[1]]));
        }

        let d = img.diameter;
        let n_mask = self.mask.len() as f64;
        let mean = self.masked_mean(&img);
        let mut resid = vec![0.0; d * d];
        let mut value = 0.0;
        for &i in &self.mask {
            let r = img.values[i] - mean;
            resid[i] = r;
            value += r * r;
        }
        value /= n_mask;

        let mut gradient = vec![Knot::ZERO; self.optimizable.len()];
        let di = d as i64;
        for (e, &(c, lever)) in self.events.iter().zip(&warped) {
            if e.len == 0 {
                continue;
            }
            let (x_lo, x_hi) = (c[0].ceil() as i64 - 1, c[0].floor() as i64 + 1);
            let (y_lo, y_hi) = (c[1].ceil() as i64 - 1, c[1].floor() as i64 + 1);
            let mut g = [0.0; 2];
            for iy in y_lo.max(0)..=y_hi.min(di - 1) {
                let dy = iy as f64 - c[1];
                let (ky, sy) = (tent(dy), tent_slope(dy));
                for ix in x_lo.max(0)..=x_hi.min(di - 1) {
                    let r = resid[(iy * di + ix) as usize];
                    if r == 0.0 {
                        continue;
                    }
                    let dx = ix as f64 - c[0];
                    g[0] += r * tent_slope(dx) * ky;
                    g[1] += r * tent(dx) * sy;
                }
            }
            if g == [0.0, 0.0] {
                continue;
            }
            let scale = 2.0 * e.weight / n_mask;
            let gen = rotate_generator(lever);
            let local = Knot::new(
                scale * g[0],
                scale * g[1],
                scale * (g[0] * gen[0] + g[1] * gen[1]),
            );
            for (k, l) in e.lambda[..e.len].iter().enumerate() {
                gradient[e.first + k] += local * *l;
            }
        }
        ObjectiveGradient {
            value,
            first_knot: self.optimizable.start,
            gradient,
        }
    }
}

/// `σ*` and `∂σ*/∂k_i` for every knot in `optimizable` (a suffix of the knot
/// indices).
pub fn objective_gradient(
    events: &[Event],
    spline: &Se2Spline,
    optimizable: Range<usize>,
    history: &HistoryPatch,
    signed_polarity: bool,
) -> Result<ObjectiveGradient, PatchError> {
    let range = optimizable.clone();
    let w = WindowObjective::new(events, spline, optimizable, history, signed_polarity)?;
    Ok(w.value_and_gradient(&spline.knots()[range]))
}
