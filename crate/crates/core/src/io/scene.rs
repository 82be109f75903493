use std::fmt::Write;

use crate::synthetic::{PatternKind, SceneSpec, Trajectory, TrajectorySegment};

use super::{content_lines, malformed, ParseError};

fn floats(value: &str, n: usize, what: &str) -> Result<Vec<f64>, ParseError> {
    value
        .split_ascii_whitespace()
        .map(|f| match f.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(malformed(n, format!("bad number `{f}` in {what}"))),
        })
        .collect()
}

fn pair(value: &str, n: usize, what: &str) -> Result<[f64; 2], ParseError> {
    match floats(value, n, what)?[..] {
        [a, b] => Ok([a, b]),
        _ => Err(malformed(n, format!("{what} takes two numbers"))),
    }
}

fn scalar<T: std::str::FromStr>(value: &str, n: usize, key: &str) -> Result<T, ParseError> {
    value
        .parse()
        .map_err(|_| malformed(n, format!("bad value `{value}` for `{key}`")))
}

/// Parses a scene description.
///
/// Scalar keys mirror [`SceneSpec`]. Motion is either `velocity = vx vy`
/// plus `omega = w` (constant velocity), or one or more
/// `segment = start ; x-coeffs ; y-coeffs ; theta-coeffs` lines with
/// coefficients in ascending powers of `t − start`. `pivot = x y` sets the
/// rotation center and `feature = x y` (repeatable) lists world points to
/// track.
pub fn parse_scene(text: &str) -> Result<SceneSpec, ParseError> {
    let mut spec = SceneSpec::default();
    let mut velocity = None;
    let mut omega = None;
    let mut pivot = [0.0, 0.0];
    let mut segments: Vec<TrajectorySegment> = Vec::new();
    for (n, line) in content_lines(text) {
        let line = line.split('#').next().unwrap_or("").trim();
        let Some((key, value)) = line.split_once('=') else {
            return Err(malformed(n, "expected `key = value`"));
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "pattern" => {
                spec.pattern = PatternKind::parse(value)
                    .ok_or_else(|| malformed(n, format!("unknown pattern `{value}`")))?
            }
            "spacing" => spec.spacing = scalar(value, n, key)?,
            "width" => spec.width = scalar(value, n, key)?,
            "height" => spec.height = scalar(value, n, key)?,
            "threshold" => spec.threshold = scalar(value, n, key)?,
            "duration" => spec.duration = scalar(value, n, key)?,
            "noise_rate" => spec.noise_rate = scalar(value, n, key)?,
            "sim_rate" => spec.sim_rate = scalar(value, n, key)?,
            "seed" => spec.seed = scalar(value, n, key)?,
            "feature_margin" => spec.feature_margin = scalar(value, n, key)?,
            "velocity" => velocity = Some(pair(value, n, key)?),
            "omega" => omega = Some(scalar::<f64>(value, n, key)?),
            "pivot" => pivot = pair(value, n, key)?,
            "feature" => spec.features.push(pair(value, n, key)?),
            "segment" => {
                let parts: Vec<&str> = value.split(';').collect();
                let [start, x, y, theta] = parts[..] else {
                    return Err(malformed(n, "segment is `start ; x ; y ; theta`"));
                };
                let start = scalar::<f64>(start.trim(), n, "segment start")?;
                if let Some(prev) = segments.last() {
                    if start <= prev.start {
                        return Err(malformed(n, "segment starts must increase"));
                    }
                }
                segments.push(TrajectorySegment {
                    start,
                    x: floats(x, n, "segment")?,
                    y: floats(y, n, "segment")?,
                    theta: floats(theta, n, "segment")?,
                });
            }
            _ => {
                return Err(ParseError::UnknownKey {
                    line: n,
                    key: key.to_string(),
                })
            }
        }
    }
    spec.trajectory = if segments.is_empty() {
        Trajectory::constant_velocity(velocity.unwrap_or([0.0, 0.0]), omega.unwrap_or(0.0), pivot)
    } else if velocity.is_some() || omega.is_some() {
        return Err(ParseError::Invalid(
            "`segment` cannot be combined with `velocity`/`omega`".into(),
        ));
    } else {
        Trajectory { pivot, segments }
    };
    spec.validate()
        .map_err(|e| ParseError::Invalid(e.to_string()))?;
    Ok(spec)
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")
}

/// Writes a scene that [`parse_scene`] reads back unchanged.
pub fn write_scene(spec: &SceneSpec) -> String {
    let mut s = String::new();
    writeln!(s, "pattern = {}", spec.pattern.as_str()).unwrap();
    writeln!(s, "spacing = {}", spec.spacing).unwrap();
    writeln!(s, "width = {}", spec.width).unwrap();
    writeln!(s, "height = {}", spec.height).unwrap();
    writeln!(s, "threshold = {}", spec.threshold).unwrap();
    writeln!(s, "duration = {}", spec.duration).unwrap();
    writeln!(s, "noise_rate = {}", spec.noise_rate).unwrap();
    writeln!(s, "sim_rate = {}", spec.sim_rate).unwrap();
    writeln!(s, "seed = {}", spec.seed).unwrap();
    writeln!(s, "feature_margin = {}", spec.feature_margin).unwrap();
    let p = spec.trajectory.pivot;
    writeln!(s, "pivot = {} {}", p[0], p[1]).unwrap();
    for seg in &spec.trajectory.segments {
        writeln!(
            s,
            "segment = {} ; {} ; {} ; {}",
            seg.start,
            join(&seg.x),
            join(&seg.y),
            join(&seg.theta)
        )
        .unwrap();
    }
    for f in &spec.features {
        writeln!(s, "feature = {} {}", f[0], f[1]).unwrap();
    }
    s
}
