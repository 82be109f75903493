//! Sliding-window lifecycle of a single tracked feature.
//!
//! Events are stored in the feature's own frame (origin at the seed
//! position), so the spline's SE(2) warps rotate about the feature center.
//! One event bin is kept per spline segment. When an event arrives past the
//! spline's domain a knot is appended, the oldest bin beyond the window is
//! folded into the history patch, and the last knots are re-optimized.

use std::collections::VecDeque;
use std::ops::Range;

use log::trace;

use crate::geometry::{Knot, Se2Spline, Vec2};
use crate::patch::{accumulate, dist2, Event, HistoryPatch, PatchGrid, WindowObjective};

use super::{TrackerConfig, TrackerError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TerminationReason {
    OutOfBounds,
    Starved,
    Diverged,
    EndOfStream,
}

impl TerminationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminationReason::OutOfBounds => "out_of_bounds",
            TerminationReason::Starved => "starved",
            TerminationReason::Diverged => "diverged",
            TerminationReason::EndOfStream => "end_of_stream",
        }
    }
}

impl std::fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureStatus {
    Active,
    Terminated { reason: TerminationReason, at: f64 },
}

/// Per-feature counters, reported in the run manifest.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureStats {
    pub events_accepted: usize,
    pub events_dropped: usize,
    pub knots_appended: usize,
    pub bins_folded: usize,
    pub optimize_calls: usize,
    pub bootstrap_calls: usize,
    pub line_search_iterations: usize,
    pub objective_evaluations: usize,
    /// Post-bootstrap calls split by window size and by whether the base
    /// window held fewer than `⌊d²/4⌋` events.
    pub base_window_below_threshold: usize,
    pub base_window_at_or_above_threshold: usize,
    pub extended_window_below_threshold: usize,
    pub extended_window_at_or_above_threshold: usize,
}

/// Outcome of one `optimize_window` call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeReport {
    pub optimized_knots: usize,
    pub active_events: usize,
    pub iterations: usize,
    pub value_before: f64,
    pub value_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct EventBin {
    segment: usize,
    events: Vec<Event>,
}

/// One timestamped output sample of a track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackSample {
    pub t: f64,
    pub position: Vec2,
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTrack {
    pub id: usize,
    pub samples: Vec<TrackSample>,
    pub termination: TerminationReason,
}

#[derive(Debug, Clone)]
pub struct FeatureState {
    id: usize,
    seed: Vec2,
    start_time: f64,
    config: TrackerConfig,
    spline: Se2Spline,
    bins: VecDeque<EventBin>,
    history: HistoryPatch,
    status: FeatureStatus,
    last_time: f64,
    pending: usize,
    starved_streak: usize,
    stats: FeatureStats,
}

impl FeatureState {
    /// Starts a feature at rest: `order` zero knots, empty history.
    pub fn spawn(
        id: usize,
        seed: Vec2,
        seed_time: f64,
        config: &TrackerConfig,
        active_features: usize,
    ) -> Result<Self, TrackerError> {
        config.validate()?;
        if active_features >= config.max_features {
            return Err(TrackerError::BudgetExhausted(config.max_features));
        }
        if !position_in_bounds(seed, config) {
            return Err(TrackerError::SeedOutOfBounds {
                x: seed[0],
                y: seed[1],
            });
        }
        let spline =
            Se2Spline::constant(config.order, seed_time, config.knot_interval, Knot::ZERO)?;
        let history = HistoryPatch::new(config.diameter, [0.0, 0.0], seed_time, config.decay)?;
        let mut bins = VecDeque::new();
        bins.push_back(EventBin {
            segment: 0,
            events: Vec::new(),
        });
        Ok(Self {
            id,
            seed,
            start_time: seed_time,
            config: *config,
            spline,
            bins,
            history,
            status: FeatureStatus::Active,
            last_time: seed_time,
            pending: 0,
            starved_streak: 0,
            stats: FeatureStats::default(),
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn seed(&self) -> Vec2 {
        self.seed
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn spline(&self) -> &Se2Spline {
        &self.spline
    }

    pub fn history(&self) -> &HistoryPatch {
        &self.history
    }

    pub fn status(&self) -> FeatureStatus {
        self.status
    }

    pub fn is_active(&self) -> bool {
        self.status == FeatureStatus::Active
    }

    pub fn last_time(&self) -> f64 {
        self.last_time
    }

    pub fn stats(&self) -> &FeatureStats {
        &self.stats
    }

    pub fn active_bin_count(&self) -> usize {
        self.bins.len()
    }

    /// Events currently held in the unfolded bins (feature frame).
    pub fn active_event_count(&self) -> usize {
        self.bins.iter().map(|b| b.events.len()).sum()
    }

    /// Whether the spline is still too short for a fixed prefix plus one
    /// window; all knots are optimized (with the reference pose pinned).
    pub fn in_bootstrap(&self) -> bool {
        self.spline.num_knots() < self.config.order + self.config.window_knots
    }

    /// The feature's image position and orientation at `t`: `B(t)⁻¹` applied
    /// to the seed.
    pub fn current_position(&self, t: f64) -> Result<(Vec2, f64), TrackerError> {
        let inv = self.spline.evaluate(t)?.inverse();
        Ok((
            [self.seed[0] + inv.translation[0], self.seed[1] + inv.translation[1]],
            inv.angle,
        ))
    }

    /// Ingests one event. Events before the seed time are ignored.
    pub fn feed(&mut self, event: &Event) -> Result<(), TrackerError> {
        if !self.is_active() {
            return Ok(());
        }
        if event.t < self.last_time {
            return Err(TrackerError::NonMonotone {
                previous: self.last_time,
                t: event.t,
            });
        }
        if event.t < self.start_time {
            return Ok(());
        }
        self.last_time = event.t;
        self.advance_to(event.t)?;
        if !self.is_active() {
            return Ok(());
        }
        let local = Event::new(
            event.t,
            [event.x[0] - self.seed[0], event.x[1] - self.seed[1]],
            event.polarity,
        );
        let r = self.config.radius();
        let warped = self.spline.evaluate(local.t)?.apply(local.x);
        if dist2(warped, [0.0, 0.0]) < r * r {
            self.bins
                .back_mut()
                .expect("at least one bin")
                .events
                .push(local);
            self.pending += 1;
            self.stats.events_accepted += 1;
            if self.pending >= self.config.optimize_every {
                self.optimize_window()?;
                self.check_bounds();
            }
        }
        Ok(())
    }

    /// Extends the spline until it covers `t`, sliding the window each time.
    pub fn advance_to(&mut self, t: f64) -> Result<(), TrackerError> {
        while self.is_active() && t >= self.spline.end_time() {
            if self.pending > 0 {
                self.optimize_window()?;
                if !self.is_active() {
                    break;
                }
            }
            let completed = self.bins.back().map_or(0, |b| b.events.len());
            let boundary = self.spline.end_time();
            self.extend_and_slide()?;
            if completed < self.config.min_events_per_bin {
                self.starved_streak += 1;
            } else {
                self.starved_streak = 0;
            }
            if self.starved_streak >= self.config.starvation_bins {
                self.terminate(TerminationReason::Starved, boundary);
                break;
            }
            self.optimize_window()?;
            self.check_bounds();
        }
        Ok(())
    }

    /// Appends an extrapolated knot, opens a bin for the new segment and
    /// folds bins that fell out of the window into the history patch.
    pub fn extend_and_slide(&mut self) -> Result<(), TrackerError> {
        let k = self.spline.extrapolated_knot();
        self.spline.append_knot(k);
        self.stats.knots_appended += 1;
        self.bins.push_back(EventBin {
            segment: self.spline.num_segments() - 1,
            events: Vec::new(),
        });
        if !self.in_bootstrap() {
            while self.bins.len() > self.config.retained_bins() {
                let bin = self.bins.pop_front().expect("non-empty");
                let img = self.segment_image(&bin)?;
                let until = self.spline.segment_start(bin.segment + 1);
                self.history.fold(&img, until)?;
                self.stats.bins_folded += 1;
            }
        }
        Ok(())
    }

    fn segment_image(&self, bin: &EventBin) -> Result<PatchGrid, TrackerError> {
        let mut img = PatchGrid::new(self.config.diameter, [0.0, 0.0], self.start_time)?;
        let interval = (
            self.spline.segment_start(bin.segment),
            self.spline.segment_start(bin.segment + 1),
        );
        accumulate(
            &bin.events,
            &self.spline,
            interval,
            &mut img,
            self.config.signed_polarity,
        )?;
        Ok(img)
    }

    /// Number of knots the next optimization would update.
    pub fn window_size(&self) -> usize {
        if self.in_bootstrap() {
            return self.spline.num_knots();
        }
        let m = self.config.window_knots;
        if self.config.adaptive_window && self.base_window_events() < self.config.adaptive_threshold()
        {
            self.config.adaptive_knots
        } else {
            m
        }
    }

    fn base_window_events(&self) -> usize {
        let m = self.config.window_knots.min(self.bins.len());
        self.bins
            .iter()
            .skip(self.bins.len() - m)
            .map(|b| b.events.len())
            .sum()
    }

    /// Backtracking steepest ascent of `σ*` over the window's knots.
    ///
    /// Rotation is scaled by the patch radius so that one unit of every
    /// parameter moves a rim pixel by about one pixel.
    pub fn optimize_window(&mut self) -> Result<OptimizeReport, TrackerError> {
        self.pending = 0;
        let bootstrap = self.in_bootstrap();
        let num_knots = self.spline.num_knots();
        let (knots, bins_used) = if bootstrap {
            (num_knots, self.bins.len())
        } else {
            let m = self.window_size().min(num_knots);
            (m, m.min(self.bins.len()))
        };
        let skip = self.bins.len() - bins_used;
        let active: Vec<Event> = self
            .bins
            .iter()
            .skip(skip)
            .flat_map(|b| b.events.iter().copied())
            .collect();
        let mut report = OptimizeReport {
            optimized_knots: knots,
            active_events: active.len(),
            iterations: 0,
            value_before: 0.0,
            value_after: 0.0,
        };
        if !self.is_active() || active.is_empty() {
            return Ok(report);
        }

        self.stats.optimize_calls += 1;
        if bootstrap {
            self.stats.bootstrap_calls += 1;
        } else {
            let below = self.base_window_events() < self.config.adaptive_threshold();
            let extended = knots > self.config.window_knots;
            match (extended, below) {
                (false, true) => self.stats.base_window_below_threshold += 1,
                (false, false) => self.stats.base_window_at_or_above_threshold += 1,
                (true, true) => self.stats.extended_window_below_threshold += 1,
                (true, false) => self.stats.extended_window_at_or_above_threshold += 1,
            }
        }

        // Bins kept for the adaptive window but not optimized this time act
        // as history; their warp does not depend on the optimized knots.
        let mut history = self.history.clone();
        for bin in self.bins.iter().take(skip) {
            let img = self.segment_image(bin)?;
            history.fold(&img, self.spline.segment_start(bin.segment + 1))?;
        }

        let opt = num_knots - knots..num_knots;
        let anchor: Option<Vec<f64>> = if bootstrap {
            let w = self.spline.knot_weights(self.start_time)?;
            Some(opt.clone().map(|i| w.get(i)).collect())
        } else {
            None
        };
        let before: Vec<Knot> = self.spline.knots()[opt.clone()].to_vec();
        let ls = self.config.line_search;
        let rim = self.config.radius().max(1.0);
        let signed = self.config.signed_polarity;

        let precondition = knot_preconditioner(&self.spline, &active, opt.clone())?;
        let objective = WindowObjective::new(&active, &self.spline, opt.clone(), &history, signed)?;
        let mut current: Vec<Knot> = before.clone();
        let mut trial = current.clone();

        let mut value = f64::NAN;
        // Largest displacement of the next first trial; after an accepted
        // step it restarts from twice that step, which saves most of the
        // backtracking once the iterates settle.
        let mut step = ls.initial_step;
        for _ in 0..ls.max_iterations {
            let og = objective.value_and_gradient(&current);
            self.stats.objective_evaluations += 1;
            value = og.value;
            if report.iterations == 0 {
                report.value_before = value;
            }
            let grad: Vec<[f64; 3]> = og
                .gradient
                .iter()
                .map(|g| [g.x, g.y, g.theta / rim])
                .collect();
            let dir = ascent_direction(&grad, &precondition, anchor.as_deref());
            let gmax = dir
                .iter()
                .flat_map(|d| d.iter())
                .fold(0.0f64, |m, v| m.max(v.abs()));
            if !(gmax > 0.0) || !gmax.is_finite() {
                break;
            }
            let slope: f64 = grad
                .iter()
                .zip(&dir)
                .flat_map(|(g, d)| g.iter().zip(d).map(|(a, b)| a * b))
                .sum();
            let mut alpha = step / gmax;
            let mut accepted = None;
            for _ in 0..=ls.max_backtracks {
                for (k, (b, d)) in trial.iter_mut().zip(current.iter().zip(&dir)) {
                    *k = Knot::new(
                        b.x + alpha * d[0],
                        b.y + alpha * d[1],
                        b.theta + alpha * d[2] / rim,
                    );
                }
                let f_new = objective.value(&trial);
                self.stats.objective_evaluations += 1;
                if f_new >= value + ls.sufficient_increase * alpha * slope {
                    accepted = Some(f_new);
                    break;
                }
                alpha *= ls.contraction;
            }
            let Some(f_new) = accepted else { break };
            std::mem::swap(&mut current, &mut trial);
            report.iterations += 1;
            let gain = (f_new - value) / value.abs().max(f64::MIN_POSITIVE);
            value = f_new;
            step = (2.0 * alpha * gmax).min(ls.initial_step);
            if alpha * gmax < ls.min_step || gain < ls.min_relative_gain {
                break;
            }
        }
        self.spline.knots_mut()[opt.clone()].copy_from_slice(&current);
        if report.iterations == 0 {
            report.value_before = value;
        }
        report.value_after = value;
        self.stats.line_search_iterations += report.iterations;

        let moved = self.spline.knots()[opt.clone()]
            .iter()
            .zip(&before)
            .map(|(a, b)| {
                (a.x - b.x)
                    .abs()
                    .max((a.y - b.y).abs())
                    .max(rim * (a.theta - b.theta).abs())
            })
            .fold(0.0f64, f64::max);
        if moved > self.config.divergence_limit() {
            self.spline.knots_mut()[opt].copy_from_slice(&before);
            self.terminate(TerminationReason::Diverged, self.last_time);
            return Ok(report);
        }

        self.refilter(bins_used)?;
        trace!(
            "feature {} optimized {} knots over {} events: {:.4} -> {:.4} in {} iterations",
            self.id,
            knots,
            report.active_events,
            report.value_before,
            report.value_after,
            report.iterations
        );
        Ok(report)
    }

    fn refilter(&mut self, bins_used: usize) -> Result<(), TrackerError> {
        let r2 = self.config.radius().powi(2);
        let skip = self.bins.len() - bins_used;
        let spline = &self.spline;
        let mut dropped = 0;
        for bin in self.bins.iter_mut().skip(skip) {
            let before = bin.events.len();
            let mut err = None;
            bin.events.retain(|e| match spline.evaluate(e.t) {
                Ok(p) => dist2(p.apply(e.x), [0.0, 0.0]) < r2,
                Err(x) => {
                    err = Some(x);
                    true
                }
            });
            if let Some(e) = err {
                return Err(e.into());
            }
            dropped += before - bin.events.len();
        }
        self.stats.events_dropped += dropped;
        Ok(())
    }

    /// Reason the feature should stop, if any.
    pub fn terminate_check(&self) -> Option<TerminationReason> {
        if let FeatureStatus::Terminated { reason, .. } = self.status {
            return Some(reason);
        }
        if self.starved_streak >= self.config.starvation_bins {
            return Some(TerminationReason::Starved);
        }
        match self.current_position(self.last_time) {
            Ok((p, _)) if position_in_bounds(p, &self.config) => None,
            _ => Some(TerminationReason::OutOfBounds),
        }
    }

    fn check_bounds(&mut self) {
        if !self.is_active() {
            return;
        }
        if let Some(reason) = self.terminate_check() {
            self.terminate(reason, self.last_time);
        }
    }

    fn terminate(&mut self, reason: TerminationReason, at: f64) {
        if self.is_active() {
            self.status = FeatureStatus::Terminated { reason, at };
        }
    }

    /// Closes the feature and samples its trajectory at the output rate and
    /// at every knot time up to the end of its life.
    pub fn finish(mut self) -> (FeatureTrack, FeatureStats) {
        if self.is_active() {
            let reason = if self.stats.events_accepted == 0 {
                TerminationReason::Starved
            } else {
                TerminationReason::EndOfStream
            };
            self.terminate(reason, self.last_time);
        }
        let (reason, end) = match self.status {
            FeatureStatus::Terminated { reason, at } => (reason, at),
            FeatureStatus::Active => unreachable!(),
        };
        let end = end.min(self.spline.end_time()).max(self.start_time);
        let times = sample_times(
            self.start_time,
            end,
            self.config.output_rate,
            self.config.knot_interval,
        );
        let samples = times
            .into_iter()
            .filter_map(|t| {
                self.current_position(t).ok().map(|(position, angle)| TrackSample {
                    t,
                    position,
                    angle,
                })
            })
            .collect();
        (
            FeatureTrack {
                id: self.id,
                samples,
                termination: reason,
            },
            self.stats,
        )
    }
}

/// Largest ratio between the step scales of two knots.
const MAX_PRECONDITION: f64 = 100.0;

/// Diagonal scale per optimizable knot: inverse of its summed squared basis
/// weight over the active events, relative to the best-covered knot.
///
/// The newest knot enters its segment with weight `u^{n−1}/(n−1)!`, so plain
/// steepest ascent barely moves it; equalizing the diagonal curvature lets
/// it converge in the same few iterations as its neighbours.
fn knot_preconditioner(
    spline: &Se2Spline,
    events: &[Event],
    opt: Range<usize>,
) -> Result<Vec<f64>, TrackerError> {
    let mut mass = vec![0.0; opt.len()];
    for e in events {
        for (i, w) in spline.knot_weights(e.t)?.iter() {
            if opt.contains(&i) {
                mass[i - opt.start] += w * w;
            }
        }
    }
    let top = mass.iter().cloned().fold(0.0, f64::max);
    Ok(mass
        .iter()
        .map(|&m| {
            if top > 0.0 && m > 0.0 {
                (top / m).min(MAX_PRECONDITION)
            } else {
                1.0
            }
        })
        .collect())
}

/// `P·g` restricted (for the bootstrap anchor `w`) to steps that keep the
/// blended pose at the anchor time fixed: `Σ wᵢ dᵢ = 0` per component. The
/// projection is taken in the `P`-metric, so the result stays an ascent
/// direction.
fn ascent_direction(grad: &[[f64; 3]], p: &[f64], anchor: Option<&[f64]>) -> Vec<[f64; 3]> {
    let mut dir: Vec<[f64; 3]> = grad.to_vec();
    if let Some(w) = anchor {
        let wpw: f64 = w.iter().zip(p).map(|(wi, pi)| wi * wi * pi).sum();
        if wpw > 0.0 {
            for c in 0..3 {
                let s: f64 = grad
                    .iter()
                    .zip(w.iter().zip(p))
                    .map(|(g, (wi, pi))| g[c] * wi * pi)
                    .sum::<f64>()
                    / wpw;
                for (d, wi) in dir.iter_mut().zip(w) {
                    d[c] -= wi * s;
                }
            }
        }
    }
    for (d, pi) in dir.iter_mut().zip(p) {
        for v in d.iter_mut() {
            *v *= pi;
        }
    }
    dir
}

pub(crate) fn position_in_bounds(p: Vec2, config: &TrackerConfig) -> bool {
    let r = config.radius();
    let (w, h) = (config.sensor_width as f64, config.sensor_height as f64);
    p[0].is_finite()
        && p[1].is_finite()
        && p[0] >= r
        && p[1] >= r
        && p[0] <= w - 1.0 - r
        && p[1] <= h - 1.0 - r
}

/// Union of the regular output grid and the knot times in `[start, end]`.
pub(crate) fn sample_times(start: f64, end: f64, rate: f64, knot_interval: f64) -> Vec<f64> {
    const EPS: f64 = 1e-9;
    let mut times = Vec::new();
    let span = end - start;
    let n_rate = (span * rate + EPS).floor() as usize;
    times.extend((0..=n_rate).map(|k| start + k as f64 / rate));
    let n_knot = (span / knot_interval + EPS).floor() as usize;
    times.extend((0..=n_knot).map(|k| start + k as f64 * knot_interval));
    times.retain(|&t| t <= end + EPS);
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() < EPS);
    for t in &mut times {
        *t = t.min(end);
    }
    times.dedup_by(|a, b| (*a - *b).abs() < EPS);
    times
}
