//! Track quality metrics against ground truth: feature age, relative age,
//! mean error and common error, plus tracks-alive-over-time series.
//!
//! All quantities are evaluated on the union of the two records' sample
//! times inside their overlap, with linear interpolation between samples.
//! Error means are exact time averages of the interpolated error, so
//! resampling a piecewise linear track more finely does not change them.

use std::collections::BTreeSet;
use std::fmt::Write;

use thiserror::Error;

use crate::io::TrackRecordSet;
use crate::tracker::TrackSample;

/// Default error threshold `th` (px).
pub const DEFAULT_THRESHOLD: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("t={t} is outside the record span [{start}, {end}]")]
    OutsideSpan { t: f64, start: f64, end: f64 },
    #[error("track and ground truth do not overlap in time")]
    NoOverlap,
    #[error("method `{0}` shares no feature ids with the ground truth")]
    EmptyIntersection(String),
    #[error("empty record")]
    EmptyRecord,
}

fn span(samples: &[TrackSample]) -> Result<(f64, f64), EvalError> {
    match (samples.first(), samples.last()) {
        (Some(a), Some(b)) => Ok((a.t, b.t)),
        _ => Err(EvalError::EmptyRecord),
    }
}

/// Position at `t` by linear interpolation; `None` outside the span.
pub fn interpolate(samples: &[TrackSample], t: f64) -> Option<[f64; 2]> {
    let (start, end) = span(samples).ok()?;
    if t < start || t > end {
        return None;
    }
    let i = samples.partition_point(|s| s.t < t);
    let b = &samples[i];
    if b.t == t || i == 0 {
        return Some(b.position);
    }
    let a = &samples[i - 1];
    let w = (t - a.t) / (b.t - a.t);
    Some([
        a.position[0] + w * (b.position[0] - a.position[0]),
        a.position[1] + w * (b.position[1] - a.position[1]),
    ])
}

/// Euclidean distance between track and ground truth at `t`.
pub fn track_error(track: &[TrackSample], ground_truth: &[TrackSample], t: f64) -> Result<f64, EvalError> {
    let at = |s: &[TrackSample]| {
        let (start, end) = span(s)?;
        interpolate(s, t).ok_or(EvalError::OutsideSpan { t, start, end })
    };
    let (p, q) = (at(track)?, at(ground_truth)?);
    Ok((p[0] - q[0]).hypot(p[1] - q[1]))
}

/// Track-minus-truth offsets at the union of sample times inside the
/// overlap, time-ordered. Between consecutive entries both records are
/// linear, so the offset is too.
fn error_profile(track: &[TrackSample], gt: &[TrackSample]) -> Result<Vec<Offset>, EvalError> {
    let (a0, a1) = span(track)?;
    let (b0, b1) = span(gt)?;
    let (lo, hi) = (a0.max(b0), a1.min(b1));
    if lo > hi {
        return Err(EvalError::NoOverlap);
    }
    let mut times: Vec<f64> = track
        .iter()
        .chain(gt)
        .map(|s| s.t)
        .filter(|&t| t >= lo && t <= hi)
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    Ok(times
        .into_iter()
        .map(|t| {
            let p = interpolate(track, t).expect("inside span");
            let q = interpolate(gt, t).expect("inside span");
            let d = [p[0] - q[0], p[1] - q[1]];
            Offset {
                t,
                d,
                e: d[0].hypot(d[1]),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy)]
struct Offset {
    t: f64,
    d: [f64; 2],
    e: f64,
}

/// Length of the longest initial stretch of sample times whose error stays
/// within `th`, measured from the start of the overlap. Bounded by the
/// overlap, so by both record ends.
fn lifetime_of(profile: &[Offset], th: f64) -> f64 {
    let start = profile[0].t;
    let mut last_good = None;
    for o in profile {
        if o.e > th {
            break;
        }
        last_good = Some(o.t);
    }
    last_good.map_or(0.0, |t| t - start)
}

/// Feature lifetime `L` under threshold `th` (s).
pub fn lifetime(track: &[TrackSample], ground_truth: &[TrackSample], th: f64) -> Result<f64, EvalError> {
    Ok(lifetime_of(&error_profile(track, ground_truth)?, th))
}

/// `∫₀ᴸ |p + q·s| ds − base·L`, exact for a linearly moving offset.
fn segment_excess(p: [f64; 2], q: [f64; 2], len: f64, e0: f64, base: f64) -> f64 {
    let a = q[0] * q[0] + q[1] * q[1];
    let c = e0 * e0;
    if a * len * len <= 1e-6 * c {
        // Nearly constant: Simpson is exact to rounding here.
        let f = |s: f64| (p[0] + q[0] * s).hypot(p[1] + q[1] * s) - base;
        return len / 6.0 * ((e0 - base) + 4.0 * f(0.5 * len) + f(len));
    }
    let b = p[0] * q[0] + p[1] * q[1];
    // |p + q s| = √a · √(u² + m) with u = s + b/a, m = |p × q|² / a².
    let cross = p[0] * q[1] - p[1] * q[0];
    let m = (cross * cross) / (a * a);
    let prim = |u: f64| {
        let r = (u * u + m).sqrt();
        if m > 0.0 {
            0.5 * (u * r + m * (u / m.sqrt()).asinh())
        } else {
            0.5 * u * u.abs()
        }
    };
    let (u0, u1) = (b / a, len + b / a);
    a.sqrt() * (prim(u1) - prim(u0)) - base * len
}

/// Time average of the error over `[start, start + horizon]`.
#[derive(Debug, Clone, Copy)]
struct Window {
    /// Integral of `e − base`.
    excess: f64,
    duration: f64,
    base: f64,
}

impl Window {
    fn mean(&self) -> f64 {
        if self.duration > 0.0 {
            self.base + self.excess / self.duration
        } else {
            self.base
        }
    }
}

/// Window over `[start, start + horizon]`, or `None` when the profile is
/// empty. The baseline is the first sample's error, so a constant error
/// averages to itself exactly.
fn error_window(profile: &[Offset], horizon: f64) -> Option<Window> {
    let first = profile.first()?;
    let end = first.t + horizon;
    let base = first.e;
    let mut excess = 0.0;
    let mut reached = first.t;
    for w in profile.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.t >= end {
            break;
        }
        let full = b.t - a.t;
        let len = full.min(end - a.t);
        let q = [(b.d[0] - a.d[0]) / full, (b.d[1] - a.d[1]) / full];
        excess += segment_excess(a.d, q, len, a.e, base);
        reached = a.t + len;
    }
    Some(Window {
        excess,
        duration: reached - first.t,
        base,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMetrics {
    pub id: usize,
    /// Tracked lifetime `L` (s).
    pub lifetime: f64,
    /// Ground-truth span (s).
    pub gt_lifetime: f64,
    pub relative_age: f64,
    /// Time-averaged error over the lifetime; `None` when the very first
    /// sample already exceeds the threshold.
    pub mean_error: Option<f64>,
    /// Time-averaged error over the shortest lifetime of all methods.
    pub common_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub method: String,
    pub threshold: f64,
    pub mean_relative_age: f64,
    pub mean_age: f64,
    pub mean_error: Option<f64>,
    /// Requires at least two methods.
    pub mean_common_error: Option<f64>,
    pub features: Vec<FeatureMetrics>,
    /// Track ids absent from the ground truth.
    pub unmatched: Vec<usize>,
    /// Matched ids without a usable overlap (disjoint or a single instant).
    pub excluded: Vec<usize>,
}

struct Prepared {
    id: usize,
    profile: Vec<Offset>,
    lifetime: f64,
    gt_lifetime: f64,
}

fn prepare(method: &TrackRecordSet, gt: &TrackRecordSet, th: f64) -> Result<(Vec<Prepared>, Vec<usize>, Vec<usize>), EvalError> {
    let mut prepared = Vec::new();
    let mut unmatched = Vec::new();
    let mut excluded = Vec::new();
    for (&id, track) in &method.tracks {
        let Some(truth) = gt.tracks.get(&id) else {
            unmatched.push(id);
            continue;
        };
        match error_profile(track, truth) {
            Ok(profile) if profile.len() >= 2 => {
                let (g0, g1) = span(truth)?;
                prepared.push(Prepared {
                    id,
                    lifetime: lifetime_of(&profile, th),
                    profile,
                    gt_lifetime: g1 - g0,
                });
            }
            Ok(_) | Err(EvalError::NoOverlap) | Err(EvalError::EmptyRecord) => excluded.push(id),
            Err(e) => return Err(e),
        }
    }
    if prepared.is_empty() && unmatched.len() == method.tracks.len() {
        return Err(EvalError::EmptyIntersection(method.label.clone()));
    }
    Ok((prepared, unmatched, excluded))
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Aggregates over windows: per-feature means averaged over features, or
/// (pooled) total error integral over total duration.
fn aggregate(windows: &[Window], pooled: bool) -> Option<f64> {
    if windows.is_empty() {
        return None;
    }
    let duration: f64 = windows.iter().map(|w| w.duration).sum();
    if pooled && duration > 0.0 {
        let base = windows.iter().map(|w| w.base).fold(f64::INFINITY, f64::min);
        let excess: f64 = windows
            .iter()
            .map(|w| w.excess + (w.base - base) * w.duration)
            .sum();
        return Some(base + excess / duration);
    }
    mean(windows.iter().map(Window::mean))
}

/// One report per method, in input order.
///
/// Relative age is `min(L / L_gt, 1)`; a zero-length ground truth counts as
/// fully tracked. Mean error averages each feature's time-averaged error
/// over its lifetime; `pooled` instead divides the total error integral by
/// the total lifetime. Common error uses, per feature, the shortest lifetime
/// over all methods and only features every method tracked.
pub fn compute_metrics(
    methods: &[TrackRecordSet],
    ground_truth: &TrackRecordSet,
    th: f64,
    pooled: bool,
) -> Result<Vec<MetricReport>, EvalError> {
    let prepared = methods
        .iter()
        .map(|m| prepare(m, ground_truth, th))
        .collect::<Result<Vec<_>, _>>()?;

    let common: Option<Vec<(usize, f64)>> = (methods.len() >= 2).then(|| {
        let mut ids: BTreeSet<usize> = prepared[0].0.iter().map(|p| p.id).collect();
        for (p, _, _) in &prepared[1..] {
            let other: BTreeSet<usize> = p.iter().map(|q| q.id).collect();
            ids = ids.intersection(&other).copied().collect();
        }
        ids.into_iter()
            .map(|id| {
                let t_min = prepared
                    .iter()
                    .map(|(p, _, _)| p.iter().find(|q| q.id == id).unwrap().lifetime)
                    .fold(f64::INFINITY, f64::min);
                (id, t_min)
            })
            .collect()
    });

    let mut reports = Vec::with_capacity(methods.len());
    for (method, (features, unmatched, excluded)) in methods.iter().zip(prepared) {
        let mut rows = Vec::with_capacity(features.len());
        let mut error_windows = Vec::new();
        let mut common_windows = Vec::new();
        for f in &features {
            let relative_age = if f.gt_lifetime > 0.0 {
                (f.lifetime / f.gt_lifetime).clamp(0.0, 1.0)
            } else {
                1.0
            };
            let good_start = f.profile[0].e <= th;
            let window = good_start
                .then(|| error_window(&f.profile, f.lifetime))
                .flatten();
            if let Some(w) = window {
                error_windows.push(w);
            }
            let common_window = common.as_ref().and_then(|c| {
                let &(_, t_min) = c.iter().find(|(id, _)| *id == f.id)?;
                if !good_start {
                    return None;
                }
                error_window(&f.profile, t_min)
            });
            if let Some(w) = common_window {
                common_windows.push(w);
            }
            rows.push(FeatureMetrics {
                id: f.id,
                lifetime: f.lifetime,
                gt_lifetime: f.gt_lifetime,
                relative_age,
                mean_error: window.map(|w| w.mean()),
                common_error: common_window.map(|w| w.mean()),
            });
        }
        reports.push(MetricReport {
            method: method.label.clone(),
            threshold: th,
            mean_relative_age: mean(rows.iter().map(|r| r.relative_age)).unwrap_or(0.0),
            mean_age: mean(rows.iter().map(|r| r.lifetime)).unwrap_or(0.0),
            mean_error: aggregate(&error_windows, pooled),
            mean_common_error: if common.is_some() {
                aggregate(&common_windows, pooled)
            } else {
                None
            },
            features: rows,
            unmatched,
            excluded,
        });
    }
    Ok(reports)
}

/// For each grid time, per method, the number of features whose lifetime
/// window `[start, start + L]` contains it.
pub fn tracks_alive_series(
    methods: &[TrackRecordSet],
    ground_truth: &TrackRecordSet,
    th: f64,
    grid: &[f64],
) -> Vec<Vec<usize>> {
    let windows: Vec<Vec<(f64, f64)>> = methods
        .iter()
        .map(|m| {
            m.tracks
                .iter()
                .filter_map(|(id, track)| {
                    let profile = error_profile(track, ground_truth.tracks.get(id)?).ok()?;
                    let start = profile[0].t;
                    (profile[0].e <= th).then(|| (start, start + lifetime_of(&profile, th)))
                })
                .collect()
        })
        .collect();
    grid.iter()
        .map(|&t| {
            windows
                .iter()
                .map(|w| w.iter().filter(|&&(a, b)| a <= t && t <= b).count())
                .collect()
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:.9}"))
}

pub const METRICS_HEADER: &str =
    "dataset,method,mean_relative_age,mean_age,mean_error,mean_common_error,threshold";

/// One row per method, Table 1 column layout.
pub fn write_metrics_csv(dataset: &str, reports: &[MetricReport]) -> String {
    let mut s = format!("{METRICS_HEADER}\n");
    for r in reports {
        writeln!(
            s,
            "{dataset},{},{:.9},{:.9},{},{},{:.9}",
            r.method,
            r.mean_relative_age,
            r.mean_age,
            opt(r.mean_error),
            opt(r.mean_common_error),
            r.threshold
        )
        .unwrap();
    }
    s
}

pub fn write_feature_csv(reports: &[MetricReport]) -> String {
    let mut s =
        String::from("method,feature_id,lifetime,gt_lifetime,relative_age,mean_error,common_error\n");
    for r in reports {
        for f in &r.features {
            writeln!(
                s,
                "{},{},{:.9},{:.9},{:.9},{},{}",
                r.method,
                f.id,
                f.lifetime,
                f.gt_lifetime,
                f.relative_age,
                opt(f.mean_error),
                opt(f.common_error)
            )
            .unwrap();
        }
    }
    s
}

/// `t,<method…>` rows of alive counts.
pub fn write_alive_csv(labels: &[&str], grid: &[f64], counts: &[Vec<usize>]) -> String {
    let mut s = String::from("t");
    for l in labels {
        s.push(',');
        s.push_str(l);
    }
    s.push('\n');
    for (t, row) in grid.iter().zip(counts) {
        write!(s, "{t:.9}").unwrap();
        for c in row {
            write!(s, ",{c}").unwrap();
        }
        s.push('\n');
    }
    s
}
