//! The acceptance checks, shared by the acceptance runner and the focused
//! integration tests. Each returns a pass flag and a one-line detail.

use std::time::Instant;

use evtrack_core::eval::{self, compute_metrics, DEFAULT_THRESHOLD};
use evtrack_core::geometry::{basis_weights, Knot, Se2Spline};
use evtrack_core::io::{
    parse_events, parse_seeds, parse_tracks, write_events, write_seeds, write_tracks,
    TrackRecordSet,
};
use evtrack_core::patch::{accumulate, modified_image, objective_gradient, Event, HistoryPatch, PatchGrid, Polarity};
use evtrack_core::synthetic::{generate, PatternKind, SceneSpec, Trajectory};
use evtrack_core::tracker::{FeatureTrack, RunOutput, TerminationReason, TrackSample};
use evtrack_core::{run, Seed, TrackerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// 1. Gradient oracle

/// Relative error of one gradient component; components that are zero in
/// both (knots without support) compare as equal.
fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale == 0.0 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Grid coordinates of `e` under each ±h perturbation of every optimizable
/// knot component; true when any of them straddles a kink of the bilinear
/// kernel (an integer grid coordinate), where the objective is not
/// differentiable and central differences are meaningless.
fn near_kink(e: &Event, spline: &OracleSpline, first_opt: usize, h: f64, d: usize) -> bool {
    let half = (d as f64 - 1.0) / 2.0;
    let grid = |s: &OracleSpline| {
        let w = s.warp(e);
        [w[0] + half, w[1] + half]
    };
    let base = grid(spline);
    for k in first_opt..spline.knots.len() {
        for c in 0..3 {
            for sign in [-1.0, 1.0] {
                let mut s = spline.clone();
                let mut a = s.knots[k].to_array();
                a[c] += sign * h;
                s.knots[k] = Knot::from_array(a);
                let p = grid(&s);
                for axis in 0..2 {
                    let (lo, hi) = (base[axis].min(p[axis]), base[axis].max(p[axis]));
                    if lo.floor() != hi.floor() || lo.fract() == 0.0 {
                        return true;
                    }
                }
            }
        }
    }
    false
}

pub struct GradientCase {
    pub events: Vec<Event>,
    pub spline: OracleSpline,
    pub history: Vec<f64>,
    pub first_opt: usize,
    pub diameter: usize,
    pub signed: bool,
}

pub fn gradient_case(seed: u64, h: f64) -> GradientCase {
    let mut r = rng(seed);
    let order = r.gen_range(2..=4);
    let num_knots = r.gen_range(4..=6);
    let dt = r.gen_range(0.02..0.1);
    let t0 = r.gen_range(0.0..2.0);
    let knots: Vec<Knot> = (0..num_knots)
        .map(|_| Knot::new(r.gen_range(-3.0..3.0), r.gen_range(-3.0..3.0), r.gen_range(-0.3..0.3)))
        .collect();
    let spline = OracleSpline { order, t0, dt, knots };
    let diameter = [21, 31][r.gen_range(0..2)];
    let first_opt = r.gen_range(0..num_knots);
    let signed = r.gen_bool(0.5);
    let end = t0 + (num_knots - order + 1) as f64 * dt;
    let n_events = r.gen_range(200..=400);
    let mut events = Vec::with_capacity(n_events);
    while events.len() < n_events {
        let radius = 0.5 * (diameter as f64 - 1.0) - 4.0;
        let (rho, phi) = (radius * r.gen::<f64>().sqrt(), r.gen_range(0.0..std::f64::consts::TAU));
        let polarity = if r.gen_bool(0.5) { Polarity::Positive } else { Polarity::Negative };
        let e = Event::new(r.gen_range(t0..end), [rho * phi.cos(), rho * phi.sin()], polarity);
        if !near_kink(&e, &spline, first_opt, h, diameter) {
            events.push(e);
        }
    }
    let history = (0..diameter * diameter).map(|_| r.gen_range(0.0..3.0)).collect();
    GradientCase {
        events,
        spline,
        history,
        first_opt,
        diameter,
        signed,
    }
}

/// Worst relative error between the analytic gradient and central
/// differences of the oracle objective, plus the worst relative value gap.
pub fn gradient_case_error(case: &GradientCase, h: f64) -> (f64, f64) {
    let s = &case.spline;
    let spline = Se2Spline::new(s.order, s.t0, s.dt, s.knots.clone()).unwrap();
    let mut history = HistoryPatch::new(case.diameter, [0.0, 0.0], s.t0, 0.5).unwrap();
    let mut img = PatchGrid::new(case.diameter, [0.0, 0.0], s.t0).unwrap();
    img.values_mut().copy_from_slice(&case.history);
    history.fold(&img, s.t0).unwrap();
    let range = case.first_opt..s.knots.len();
    let analytic = objective_gradient(&case.events, &spline, range, &history, case.signed).unwrap();

    let f = |sp: &OracleSpline| oracle_objective(&case.events, sp, &case.history, case.diameter, case.signed);
    let value = f(s);
    let value_gap = (analytic.value - value).abs() / value.abs();
    let mut worst: f64 = 0.0;
    for (offset, g) in analytic.gradient.iter().enumerate() {
        let k = case.first_opt + offset;
        for c in 0..3 {
            let mut plus = s.clone();
            let mut minus = s.clone();
            let mut a = plus.knots[k].to_array();
            a[c] += h;
            plus.knots[k] = Knot::from_array(a);
            let mut b = minus.knots[k].to_array();
            b[c] -= h;
            minus.knots[k] = Knot::from_array(b);
            let numeric = (f(&plus) - f(&minus)) / (2.0 * h);
            worst = worst.max(relative_error(g.to_array()[c], numeric));
        }
    }
    (worst, value_gap)
}

pub fn criterion_gradient() -> Check {
    let h = 1e-4;
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut worst_value: f64 = 0.0;
    for seed in 0..20 {
        let case = gradient_case(1000 + seed, h);
        let (g, v) = gradient_case_error(&case, h);
        worst = worst.max(g);
        worst_value = worst_value.max(v);
    }
    let elapsed = start.elapsed().as_secs_f64();
    Check::new(
        worst < 1e-4 && worst_value < 1e-12 && elapsed < 10.0,
        format!("20 configs, max rel err {worst:.2e} (< 1e-4), value gap {worst_value:.1e}, {elapsed:.2} s (< 10 s)"),
    )
}

// ---------------------------------------------------------------------------
// 2. Spline suite

/// Worst `|Σλ − 1|` over 10⁴ samples per order.
pub fn partition_of_unity_error() -> f64 {
    let mut worst: f64 = 0.0;
    for order in 2..=4 {
        for i in 0..10_000 {
            let u = i as f64 / 10_000.0;
            let s: f64 = basis_weights(u, order).unwrap().iter().sum();
            worst = worst.max((s - 1.0).abs());
        }
    }
    worst
}

/// Worst gap between the production blending weights and Cox–de Boor.
pub fn cox_de_boor_gap(max_order: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for order in 2..=max_order {
        let dt = 0.1;
        for i in 0..1000 {
            let u = i as f64 / 1000.0;
            let w = basis_weights(u, order).unwrap();
            // One-segment spline: the segment is driven by knots 0..order.
            let oracle = oracle_weights(order, 0.0, dt, order, u * dt);
            for (a, b) in w.iter().zip(&oracle) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    worst
}

fn random_spline(r: &mut ChaCha8Rng, order: usize, num_knots: usize) -> Se2Spline {
    let knots = (0..num_knots)
        .map(|_| Knot::new(r.gen_range(-10.0..10.0), r.gen_range(-10.0..10.0), r.gen_range(-1.0..1.0)))
        .collect();
    Se2Spline::new(order, 0.3, 0.05, knots).unwrap()
}

/// Number of samples outside the perturbed knot's support whose value
/// changed (must be zero), and the number of samples checked.
pub fn locality_violations() -> (usize, usize) {
    let mut r = rng(7);
    let mut violations = 0;
    let mut checked = 0;
    for order in 2..=4 {
        let num_knots = 10;
        let spline = random_spline(&mut r, order, num_knots);
        let tau = uniform_knot_times(order, spline.start_time(), spline.knot_interval(), num_knots);
        for m in 0..num_knots {
            let mut perturbed = spline.clone();
            perturbed.knots_mut()[m] = perturbed.knots()[m] + Knot::new(1.5, -2.0, 0.25);
            let (lo, hi) = (tau[m], tau[m + order]);
            for i in 0..=2000 {
                let t = spline.start_time() + (spline.end_time() - spline.start_time()) * i as f64 / 2000.0;
                if t >= lo && t <= hi {
                    continue;
                }
                checked += 1;
                if spline.evaluate_params(t).unwrap() != perturbed.evaluate_params(t).unwrap() {
                    violations += 1;
                }
            }
        }
    }
    (violations, checked)
}

/// Worst deviation from `α + β·t` for knots placed on a line at the Greville
/// abscissae of the knot sequence.
pub fn linear_precision_error() -> f64 {
    let mut worst: f64 = 0.0;
    for order in 2..=4 {
        let (t0, dt, n) = (0.25, 0.04, 9);
        let tau = uniform_knot_times(order, t0, dt, n);
        let alpha = [3.0, -1.5, 0.2];
        let beta = [30.0, 12.0, 0.5];
        let knots = (0..n)
            .map(|i| {
                let xi = tau[i + 1..i + order].iter().sum::<f64>() / (order - 1) as f64;
                Knot::new(alpha[0] + beta[0] * xi, alpha[1] + beta[1] * xi, alpha[2] + beta[2] * xi)
            })
            .collect();
        let spline = Se2Spline::new(order, t0, dt, knots).unwrap();
        for i in 0..=10_000 {
            let t = t0 + (spline.end_time() - t0) * i as f64 / 10_000.0;
            let v = spline.evaluate_params(t).unwrap().to_array();
            for c in 0..3 {
                worst = worst.max((v[c] - (alpha[c] + beta[c] * t)).abs());
            }
        }
    }
    worst
}

/// Coefficients (ascending powers of the in-segment parameter `u`) of the
/// polynomial through `(u_i, v_i)`, by Gaussian elimination.
fn fit_polynomial(us: &[f64], vs: &[f64]) -> Vec<f64> {
    let n = us.len();
    let mut a: Vec<Vec<f64>> = us
        .iter()
        .zip(vs)
        .map(|(&u, &v)| {
            let mut row: Vec<f64> = (0..n).map(|p| u.powi(p as i32)).collect();
            row.push(v);
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        for row in 0..n {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..=n {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    (0..n).map(|i| a[i][n] / a[i][i]).collect()
}

fn derivative_at(coeffs: &[f64], order: usize, u: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(order)
        .map(|(p, c)| {
            let falling: f64 = (0..order).map(|k| (p - k) as f64).product();
            c * falling * u.powi((p - order) as i32)
        })
        .sum()
}

/// Worst jump of derivatives `0..=order−2` (per unit segment parameter)
/// across interior segment boundaries.
pub fn continuity_error() -> f64 {
    let mut r = rng(11);
    let mut worst: f64 = 0.0;
    for order in 2..=4 {
        let spline = random_spline(&mut r, order, 8);
        let (t0, dt) = (spline.start_time(), spline.knot_interval());
        // Interpolation nodes strictly inside the segment.
        let us: Vec<f64> = (0..order).map(|i| (i as f64 + 0.5) / order as f64).collect();
        let fit = |j: usize, c: usize| {
            let vs: Vec<f64> = us
                .iter()
                .map(|u| spline.evaluate_params(t0 + (j as f64 + u) * dt).unwrap().to_array()[c])
                .collect();
            fit_polynomial(&us, &vs)
        };
        for j in 0..spline.num_segments() - 1 {
            for c in 0..3 {
                let (left, right) = (fit(j, c), fit(j + 1, c));
                for k in 0..=order - 2 {
                    let jump = (derivative_at(&left, k, 1.0) - derivative_at(&right, k, 0.0)).abs();
                    worst = worst.max(jump);
                }
            }
        }
    }
    worst
}

pub fn criterion_spline() -> Check {
    let pou = partition_of_unity_error();
    let cdb = cox_de_boor_gap(4);
    let (violations, checked) = locality_violations();
    let lin = linear_precision_error();
    let cont = continuity_error();
    Check::new(
        pou < 1e-12 && cdb < 1e-12 && violations == 0 && checked > 0 && lin < 1e-10 && cont < 1e-6,
        format!(
            "unity {pou:.1e} (< 1e-12), cox-de-boor {cdb:.1e}, locality {violations}/{checked} changed, \
             linear {lin:.1e} (< 1e-10), continuity {cont:.1e} (< 1e-6)"
        ),
    )
}

// ---------------------------------------------------------------------------
// 3. History telescoping

pub struct TelescopeFixture {
    pub spline: Se2Spline,
    pub oracle: OracleSpline,
    pub events: Vec<Event>,
    pub diameter: usize,
}

pub fn telescope_fixture() -> TelescopeFixture {
    let mut r = rng(21);
    let (order, dt, t0, n) = (4, 0.05, 1.0, 9);
    let knots: Vec<Knot> = (0..n)
        .map(|i| Knot::new(0.8 * i as f64 + r.gen_range(-0.3..0.3), r.gen_range(-1.0..1.0), 0.02 * i as f64))
        .collect();
    let spline = Se2Spline::new(order, t0, dt, knots.clone()).unwrap();
    let end = spline.end_time();
    let mut events: Vec<Event> = (0..3000)
        .map(|_| {
            let p = if r.gen_bool(0.5) { Polarity::Positive } else { Polarity::Negative };
            Event::new(
                r.gen_range(t0..end),
                [r.gen_range(-20.0..20.0_f64).round(), r.gen_range(-20.0..20.0_f64).round()],
                p,
            )
        })
        .collect();
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    TelescopeFixture {
        spline,
        oracle: OracleSpline { order, t0, dt, knots },
        events,
        diameter: 31,
    }
}

fn segment_image(fx: &TelescopeFixture, j: usize, signed: bool) -> PatchGrid {
    let s = &fx.spline;
    let mut img = PatchGrid::new(fx.diameter, [0.0, 0.0], s.start_time()).unwrap();
    accumulate(&fx.events, s, (s.segment_start(j), s.segment_start(j + 1)), &mut img, signed).unwrap();
    img
}

/// Worst elementwise gap between window + history (ρ = 1, `folded`
/// segments in the history) and the single-pass oracle image.
pub fn telescoping_gap(folded: usize, signed: bool) -> f64 {
    let fx = telescope_fixture();
    let s = &fx.spline;
    let mut history = HistoryPatch::new(fx.diameter, [0.0, 0.0], s.start_time(), 1.0).unwrap();
    for j in 0..folded {
        history.fold(&segment_image(&fx, j, signed), s.segment_start(j + 1)).unwrap();
    }
    let mut window = PatchGrid::new(fx.diameter, [0.0, 0.0], s.start_time()).unwrap();
    accumulate(&fx.events, s, (s.segment_start(folded), s.end_time()), &mut window, signed).unwrap();
    let combined = modified_image(&window, &history).unwrap();
    let oracle = oracle_image(&fx.events, &fx.oracle, fx.diameter, signed, true);
    combined
        .values()
        .iter()
        .zip(&oracle)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// With ρ = 0 the history after several folds equals the last folded
/// segment image bit for bit.
pub fn zero_decay_keeps_latest() -> bool {
    let fx = telescope_fixture();
    let s = &fx.spline;
    let mut history = HistoryPatch::new(fx.diameter, [0.0, 0.0], s.start_time(), 0.0).unwrap();
    let mut last = None;
    for j in 0..s.num_segments() {
        let img = segment_image(&fx, j, false);
        history.fold(&img, s.segment_start(j + 1)).unwrap();
        last = Some(img);
    }
    let last = last.unwrap();
    last.sum() > 0.0 && history.image().values() == last.values()
}

pub fn criterion_history() -> Check {
    let segments = telescope_fixture().spline.num_segments();
    let gap = (1..segments)
        .flat_map(|k| [telescoping_gap(k, false), telescoping_gap(k, true)])
        .fold(0.0, f64::max);
    let exact = zero_decay_keeps_latest();
    Check::new(
        gap < 1e-9 && exact,
        format!("rho=1 max gap {gap:.1e} (< 1e-9) over {} splits, rho=0 latest-only exact: {exact}", segments - 1),
    )
}

// ---------------------------------------------------------------------------
// 4–6. Synthetic tracking

pub struct TrackingRun {
    pub events: usize,
    pub ground_truth: Vec<FeatureTrack>,
    pub output: RunOutput,
}

pub fn track_scene(spec: &SceneSpec, config: &TrackerConfig) -> TrackingRun {
    let synth = generate(spec).unwrap();
    let seeds: Vec<Seed> = synth
        .ground_truth
        .iter()
        .map(|g| Seed::new(g.samples[0].t, g.samples[0].position))
        .collect();
    let output = run(&synth.events, &seeds, config).unwrap();
    TrackingRun {
        events: synth.events.len(),
        ground_truth: synth.ground_truth,
        output,
    }
}

/// RMS of the position error over the track's own samples.
pub fn rms_error(track: &[TrackSample], gt: &[TrackSample]) -> f64 {
    let sum: f64 = track
        .iter()
        .map(|s| {
            let g = oracle_position(gt, s.t).unwrap();
            (s.position[0] - g[0]).powi(2) + (s.position[1] - g[1]).powi(2)
        })
        .sum();
    (sum / track.len() as f64).sqrt()
}

fn survived(track: &FeatureTrack, duration: f64) -> bool {
    track.termination == TerminationReason::EndOfStream
        && track.samples.last().is_some_and(|s| s.t >= duration - 0.01)
}

pub fn translation_spec() -> SceneSpec {
    SceneSpec {
        pattern: PatternKind::Star,
        trajectory: Trajectory::constant_velocity([30.0, 0.0], 0.0, [0.0, 0.0]),
        threshold: 0.15,
        duration: 1.0,
        noise_rate: 0.0,
        // Star centers sit on a 40 px lattice offset by 20 px; the seeds are
        // spread over different positions relative to the nearest star.
        features: vec![
            [60.0, 60.0],
            [105.0, 62.0],
            [140.0, 95.0],
            [108.0, 148.0],
            [63.0, 103.0],
            [176.0, 58.0],
            [27.0, 137.0],
            [187.0, 142.0],
        ],
        ..SceneSpec::default()
    }
}

pub fn criterion_translation() -> Check {
    let start = Instant::now();
    let spec = translation_spec();
    let run = track_scene(&spec, &TrackerConfig::default());
    let elapsed = start.elapsed().as_secs_f64();
    let n = run.output.tracks.len();
    let mut worst: f64 = 0.0;
    let mut alive = 0;
    for track in &run.output.tracks {
        if survived(track, spec.duration) {
            alive += 1;
            worst = worst.max(rms_error(&track.samples, &run.ground_truth[track.id].samples));
        }
    }
    let fraction = alive as f64 / spec.features.len() as f64;
    Check::new(
        n >= 5 && worst < 0.5 && fraction >= 0.8 && elapsed < 60.0,
        format!(
            "{alive}/{} survive ({:.0}% >= 80%), worst RMS {worst:.3} px (< 0.5), {} events, {elapsed:.1} s (< 60 s)",
            spec.features.len(),
            100.0 * fraction,
            run.events
        ),
    )
}

pub fn rotation_spec() -> SceneSpec {
    // A star spinning about its own center, on a sensor just large enough to
    // hold the patch.
    SceneSpec {
        width: 120,
        height: 120,
        trajectory: Trajectory::constant_velocity([0.0, 0.0], 0.5, [60.0, 60.0]),
        features: vec![[60.0, 60.0]],
        ..SceneSpec::default()
    }
}

fn interpolate_angle(gt: &[TrackSample], t: f64) -> f64 {
    let i = gt.partition_point(|s| s.t < t).clamp(1, gt.len() - 1);
    let (a, b) = (&gt[i - 1], &gt[i]);
    a.angle + (b.angle - a.angle) * (t - a.t) / (b.t - a.t)
}

pub fn criterion_rotation() -> Check {
    let spec = rotation_spec();
    let config = TrackerConfig {
        sensor_width: spec.width,
        sensor_height: spec.height,
        ..TrackerConfig::default()
    };
    let run = track_scene(&spec, &config);
    let track = &run.output.tracks[0];
    let gt = &run.ground_truth[0].samples;
    let last = track.samples.last().unwrap();
    let angle_err = (last.angle - interpolate_angle(gt, last.t)).abs();
    let g = oracle_position(gt, last.t).unwrap();
    let pos_err = ((last.position[0] - g[0]).powi(2) + (last.position[1] - g[1]).powi(2)).sqrt();
    let alive = survived(track, spec.duration);
    Check::new(
        alive && angle_err < 0.05 && pos_err < 0.5,
        format!(
            "end t={:.3} ({}), angle err {angle_err:.4} rad (< 0.05), position err {pos_err:.3} px (< 0.5)",
            last.t, track.termination
        ),
    )
}

pub fn sparse_spec() -> SceneSpec {
    SceneSpec {
        pattern: PatternKind::RandomBlobs,
        spacing: 60.0,
        trajectory: Trajectory::constant_velocity([12.0, 6.0], 0.0, [0.0, 0.0]),
        ..SceneSpec::default()
    }
}

pub struct SwitchOutcome {
    pub fixed_age: f64,
    pub adaptive_age: f64,
    /// Post-bootstrap calls in the adaptive run that used 3 knots with fewer
    /// than d²/4 base-window events (must be positive) and the two
    /// mismatching combinations (must be zero).
    pub switched: usize,
    pub adaptive_mismatch: usize,
    /// Calls with an extended window in the fixed run (must be zero).
    pub fixed_extended: usize,
    pub fixed_below: usize,
}

pub fn switch_outcome() -> SwitchOutcome {
    let spec = sparse_spec();
    let synth = generate(&spec).unwrap();
    let seeds: Vec<Seed> = synth
        .ground_truth
        .iter()
        .map(|g| Seed::new(g.samples[0].t, g.samples[0].position))
        .collect();
    let fixed_cfg = TrackerConfig::default();
    let adaptive_cfg = TrackerConfig {
        adaptive_window: true,
        ..TrackerConfig::default()
    };
    let fixed = run(&synth.events, &seeds, &fixed_cfg).unwrap();
    let adaptive = run(&synth.events, &seeds, &adaptive_cfg).unwrap();
    let gt = TrackRecordSet::from_tracks("gt", &synth.ground_truth);
    let age = |out: &RunOutput, label: &str| {
        let set = TrackRecordSet::from_tracks(label, &out.tracks);
        compute_metrics(&[set], &gt, DEFAULT_THRESHOLD, false).unwrap()[0].mean_age
    };
    let sum = |out: &RunOutput, f: fn(&evtrack_core::tracker::FeatureStats) -> usize| {
        out.summaries.iter().map(|s| f(&s.stats)).sum::<usize>()
    };
    SwitchOutcome {
        fixed_age: age(&fixed, "ours"),
        adaptive_age: age(&adaptive, "ours*"),
        switched: sum(&adaptive, |s| s.extended_window_below_threshold),
        adaptive_mismatch: sum(&adaptive, |s| s.base_window_below_threshold + s.extended_window_at_or_above_threshold),
        fixed_extended: sum(&fixed, |s| s.extended_window_below_threshold + s.extended_window_at_or_above_threshold),
        fixed_below: sum(&fixed, |s| s.base_window_below_threshold),
    }
}

pub fn criterion_switch() -> Check {
    let o = switch_outcome();
    Check::new(
        o.switched > 0 && o.adaptive_mismatch == 0 && o.fixed_extended == 0 && o.adaptive_age >= o.fixed_age,
        format!(
            "adaptive: {} sparse 3-knot calls, {} mismatches; fixed: {} extended calls ({} sparse 2-knot); \
             mean age {:.4} s >= {:.4} s",
            o.switched, o.adaptive_mismatch, o.fixed_extended, o.fixed_below, o.adaptive_age, o.fixed_age
        ),
    )
}

// ---------------------------------------------------------------------------
// 7. Metrics oracle

fn line(times: &[f64], f: impl Fn(f64) -> [f64; 2]) -> Vec<TrackSample> {
    times
        .iter()
        .map(|&t| {
            let p = f(t);
            sample(t, p[0], p[1])
        })
        .collect()
}

fn grid(from: f64, to: f64, step: f64) -> Vec<f64> {
    let n = ((to - from) / step).round() as usize;
    (0..=n).map(|i| from + i as f64 * step).collect()
}

/// Three ground-truth features and two methods. Every offset is along +x,
/// so the error is piecewise linear in time and the trapezoid rule is
/// exact.
pub fn metrics_fixture() -> (TrackRecordSet, TrackRecordSet, TrackRecordSet) {
    let mut gt = TrackRecordSet::new("gt");
    gt.tracks.insert(0, line(&grid(0.0, 1.0, 0.1), |t| [10.0 + 10.0 * t, 20.0]));
    gt.tracks.insert(1, line(&grid(0.0, 0.8, 0.1), |t| [50.0, 50.0 + 5.0 * t]));
    gt.tracks.insert(2, line(&grid(0.2, 1.0, 0.1), |t| [50.0 + t, 60.0]));

    let mut a = TrackRecordSet::new("a");
    let off_a0 = [0.5, 0.5, 0.5, 0.5, 0.5, 1.0, 2.0, 3.5, 4.0, 4.0, 4.0];
    a.tracks.insert(
        0,
        grid(0.0, 1.0, 0.1)
            .iter()
            .zip(off_a0)
            .map(|(&t, o)| sample(t, 10.0 + 10.0 * t + o, 20.0))
            .collect(),
    );
    // Sampled off the ground-truth grid; the truth moves along y only.
    let off_a1 = |t: f64| if t < 0.4 { 0.2 + t } else { 0.6 + 2.0 * (t - 0.4) };
    a.tracks.insert(1, line(&grid(0.05, 0.75, 0.1), |t| [50.0 + off_a1(t), 50.0 + 5.0 * t]));
    // Starts beyond the threshold: no age, no error.
    a.tracks.insert(2, line(&grid(0.2, 0.9, 0.1), |t| [54.0 + t, 60.0]));

    let mut b = TrackRecordSet::new("b");
    b.tracks.insert(0, line(&grid(0.0, 0.7, 0.05), |t| [11.0 + 10.0 * t, 20.0]));
    let off_b1 = [0.2, 0.2, 0.2, 0.2, 3.2, 3.2];
    b.tracks.insert(
        1,
        grid(0.0, 0.5, 0.1)
            .iter()
            .zip(off_b1)
            .map(|(&t, o)| sample(t, 50.0 + o, 50.0 + 5.0 * t))
            .collect(),
    );
    // Not in the ground truth.
    b.tracks.insert(7, line(&grid(0.0, 0.5, 0.1), |t| [1.0, t]));
    (gt, a, b)
}

pub struct OracleReport {
    pub mean_relative_age: f64,
    pub mean_age: f64,
    pub mean_error: Option<f64>,
    pub mean_common_error: Option<f64>,
}

/// Brute-force metrics: ages, per-feature time-averaged errors averaged
/// over features, and the common error over the shortest lifetime among
/// methods for features every method tracked.
pub fn oracle_metrics(methods: &[&TrackRecordSet], gt: &TrackRecordSet, th: f64) -> Vec<OracleReport> {
    let samples = |m: &TrackRecordSet, id: usize| oracle_error_samples(&m.tracks[&id], &gt.tracks[&id]);
    let matched = |m: &TrackRecordSet| -> Vec<usize> { m.tracks.keys().copied().filter(|id| gt.tracks.contains_key(id)).collect() };
    let common: Vec<usize> = matched(methods[0])
        .into_iter()
        .filter(|id| methods.iter().all(|m| m.tracks.contains_key(id)))
        .collect();
    let avg = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let time_mean = |s: &[(f64, f64)], len: f64| if len > 0.0 { oracle_error_integral(s, len) / len } else { s[0].1 };
    methods
        .iter()
        .map(|m| {
            let mut ages = Vec::new();
            let mut rel = Vec::new();
            let mut errs = Vec::new();
            let mut common_errs = Vec::new();
            for id in matched(m) {
                let s = samples(m, id);
                let g = &gt.tracks[&id];
                let life = oracle_lifetime(&s, th);
                ages.push(life);
                rel.push((life / (g.last().unwrap().t - g[0].t)).min(1.0));
                if s[0].1 > th {
                    continue;
                }
                errs.push(time_mean(&s, life));
                if methods.len() >= 2 && common.contains(&id) {
                    let t_min = methods
                        .iter()
                        .map(|o| oracle_lifetime(&samples(o, id), th))
                        .fold(f64::INFINITY, f64::min);
                    common_errs.push(time_mean(&s, t_min));
                }
            }
            OracleReport {
                mean_relative_age: avg(&rel).unwrap_or(0.0),
                mean_age: avg(&ages).unwrap_or(0.0),
                mean_error: avg(&errs),
                mean_common_error: if methods.len() >= 2 { avg(&common_errs) } else { None },
            }
        })
        .collect()
}

/// Largest gap between production and oracle over all four metrics and
/// both methods; `None` when a metric is present in one and absent in the
/// other.
pub fn metrics_gap() -> Option<f64> {
    let (gt, a, b) = metrics_fixture();
    let reports = compute_metrics(&[a.clone(), b.clone()], &gt, DEFAULT_THRESHOLD, false).unwrap();
    let oracle = oracle_metrics(&[&a, &b], &gt, DEFAULT_THRESHOLD);
    let mut worst: f64 = 0.0;
    for (r, o) in reports.iter().zip(&oracle) {
        worst = worst.max((r.mean_relative_age - o.mean_relative_age).abs());
        worst = worst.max((r.mean_age - o.mean_age).abs());
        for (x, y) in [(r.mean_error, o.mean_error), (r.mean_common_error, o.mean_common_error)] {
            match (x, y) {
                (Some(x), Some(y)) => worst = worst.max((x - y).abs()),
                (None, None) => {}
                _ => return None,
            }
        }
    }
    Some(worst)
}

pub fn criterion_metrics() -> Check {
    let gap = metrics_gap();
    let ok = matches!(gap, Some(g) if g <= 1e-12) && DEFAULT_THRESHOLD == 3.0;
    Check::new(
        ok,
        format!(
            "4 metrics x 2 methods, max gap {} (<= 1e-12), th default {} px",
            gap.map_or("missing metric".into(), |g| format!("{g:.1e}")),
            DEFAULT_THRESHOLD
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. I/O

pub fn random_events(n: usize, seed: u64) -> Vec<Event> {
    let mut r = rng(seed);
    let mut t = 0.0;
    (0..n)
        .map(|_| {
            t += r.gen_range(0.0..2e-5);
            let p = if r.gen_bool(0.5) { Polarity::Positive } else { Polarity::Negative };
            Event::new(t, [r.gen_range(0..240) as f64, r.gen_range(0..180) as f64], p)
        })
        .collect()
}

/// Text → values → text is the identity, and values survive within half a
/// unit of the last written decimal.
pub fn round_trips_lossless() -> Result<(), String> {
    let events = random_events(20_000, 5);
    let text = write_events(&events);
    let parsed = parse_events(&text).map_err(|e| e.to_string())?.events;
    if write_events(&parsed) != text {
        return Err("event text changed on rewrite".into());
    }
    for (a, b) in events.iter().zip(&parsed) {
        if (a.t - b.t).abs() > 5e-10 || a.x != b.x || a.polarity != b.polarity {
            return Err(format!("event {a:?} came back as {b:?}"));
        }
    }

    let mut r = rng(6);
    let mut seeds: Vec<Seed> = (0..500)
        .map(|_| Seed::new(r.gen_range(0.0..5.0), [r.gen_range(0.0..240.0), r.gen_range(0.0..180.0)]))
        .collect();
    seeds.sort_by(|a, b| a.t.total_cmp(&b.t));
    let text = write_seeds(&seeds);
    let parsed = parse_seeds(&text).map_err(|e| e.to_string())?;
    if write_seeds(&parsed) != text {
        return Err("seed text changed on rewrite".into());
    }
    for (a, b) in seeds.iter().zip(&parsed) {
        let gap = (a.t - b.t).abs().max((a.position[0] - b.position[0]).abs()).max((a.position[1] - b.position[1]).abs());
        if gap > 5e-10 {
            return Err(format!("seed {a:?} came back as {b:?}"));
        }
    }

    let tracks: Vec<FeatureTrack> = (0..20)
        .map(|id| FeatureTrack {
            id,
            samples: (0..100)
                .map(|k| TrackSample {
                    t: 0.01 * k as f64 + r.gen_range(0.0..0.001),
                    position: [r.gen_range(0.0..240.0), r.gen_range(0.0..180.0)],
                    angle: r.gen_range(-3.0..3.0),
                })
                .collect(),
            termination: TerminationReason::EndOfStream,
        })
        .collect();
    let text = write_tracks(&tracks);
    let parsed = parse_tracks(&text, "t").map_err(|e| e.to_string())?;
    if parsed.to_csv() != text {
        return Err("track text changed on rewrite".into());
    }
    for tr in &tracks {
        for (a, b) in tr.samples.iter().zip(&parsed.tracks[&tr.id]) {
            let gap = (a.t - b.t)
                .abs()
                .max((a.position[0] - b.position[0]).abs())
                .max((a.position[1] - b.position[1]).abs())
                .max((a.angle - b.angle).abs());
            if gap > 5e-10 {
                return Err(format!("track sample {a:?} came back as {b:?}"));
            }
        }
    }
    Ok(())
}

/// Parsed events per second over a 10⁶-line file.
pub fn parse_throughput() -> f64 {
    let text = write_events(&random_events(1_000_000, 8));
    let start = Instant::now();
    let parsed = parse_events(&text).unwrap();
    let secs = start.elapsed().as_secs_f64();
    parsed.events.len() as f64 / secs
}

/// Synthesize, track and evaluate inside a pool of `threads` threads;
/// returns every text artifact.
pub fn pipeline_artifacts(threads: usize) -> Vec<String> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let spec = SceneSpec {
            width: 160,
            height: 120,
            duration: 0.3,
            noise_rate: 2.0,
            trajectory: Trajectory::constant_velocity([25.0, -10.0], 0.2, [80.0, 60.0]),
            seed: 3,
            ..SceneSpec::default()
        };
        let synth = generate(&spec).unwrap();
        let seeds: Vec<Seed> = synth
            .ground_truth
            .iter()
            .map(|g| Seed::new(g.samples[0].t, g.samples[0].position))
            .collect();
        let config = TrackerConfig {
            sensor_width: spec.width,
            sensor_height: spec.height,
            ..TrackerConfig::default()
        };
        let out = run(&synth.events, &seeds, &config).unwrap();
        let gt = TrackRecordSet::from_tracks("gt", &synth.ground_truth);
        let tracked = TrackRecordSet::from_tracks("ours", &out.tracks);
        let reports = compute_metrics(&[tracked], &gt, DEFAULT_THRESHOLD, false).unwrap();
        vec![
            write_events(&synth.events),
            write_tracks(&synth.ground_truth),
            write_tracks(&out.tracks),
            format!("{:?}", out.summaries),
            eval::write_metrics_csv("synthetic", &reports),
        ]
    })
}

pub fn criterion_io() -> Check {
    let lossless = round_trips_lossless();
    let rate = parse_throughput();
    let one = pipeline_artifacts(1);
    let four = pipeline_artifacts(4);
    let deterministic = one == four;
    Check::new(
        lossless.is_ok() && rate >= 1e6 && deterministic,
        format!(
            "round trips {}, parse {:.2e} events/s (>= 1e6), 1 vs 4 threads identical: {deterministic}",
            lossless.as_ref().map_or_else(|e| format!("FAILED ({e})"), |_| "lossless".to_string()),
            rate
        ),
    )
}
