use std::fmt::Write;

use crate::tracker::TrackerConfig;

use super::{content_lines, malformed, ParseError};

/// Every config key with a one-line description, in file order.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("diameter", "patch diameter d (odd, px)"),
    ("decay", "history decay rho in [0, 1]"),
    ("knot_interval", "knot spacing (s)"),
    ("order", "B-spline order"),
    ("max_features", "maximum simultaneously active features"),
    ("window_knots", "optimized knots per window"),
    ("adaptive_window", "grow the window when the base window is sparse"),
    ("adaptive_knots", "window size used by the adaptive mode"),
    ("signed_polarity", "splat events weighted by polarity"),
    ("min_events_per_bin", "events below which a knot bin counts as starved"),
    ("starvation_bins", "consecutive starved bins that terminate a feature"),
    ("optimize_every", "re-optimize after this many new events"),
    ("divergence_distance", "knot jump that marks divergence (px, or `auto` = d/2)"),
    ("output_rate", "track sample rate (Hz)"),
    ("sensor_width", "sensor width (px)"),
    ("sensor_height", "sensor height (px)"),
    ("ls_initial_step", "largest displacement of the first trial step (px)"),
    ("ls_contraction", "backtracking step contraction"),
    ("ls_sufficient_increase", "Armijo constant"),
    ("ls_max_backtracks", "backtracks per iteration"),
    ("ls_max_iterations", "ascent iterations per optimization"),
    ("ls_min_step", "stop below this accepted step (px)"),
    ("ls_min_relative_gain", "stop below this relative objective gain"),
];

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("bad value `{value}` for `{key}`"))
}

fn float(key: &str, value: &str) -> Result<f64, String> {
    let v: f64 = num(key, value)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{key}` must be finite"))
    }
}

fn boolean(key: &str, value: &str) -> Result<bool, String> {
    match value {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(format!("`{key}` must be true or false, got `{value}`")),
    }
}

/// Sets one key. `Ok(false)` means the key is unknown.
pub fn set_config_key(config: &mut TrackerConfig, key: &str, value: &str) -> Result<bool, String> {
    let ls = &mut config.line_search;
    match key {
        "diameter" => config.diameter = num(key, value)?,
        "decay" => config.decay = float(key, value)?,
        "knot_interval" => config.knot_interval = float(key, value)?,
        "order" => config.order = num(key, value)?,
        "max_features" => config.max_features = num(key, value)?,
        "window_knots" => config.window_knots = num(key, value)?,
        "adaptive_window" => config.adaptive_window = boolean(key, value)?,
        "adaptive_knots" => config.adaptive_knots = num(key, value)?,
        "signed_polarity" => config.signed_polarity = boolean(key, value)?,
        "min_events_per_bin" => config.min_events_per_bin = num(key, value)?,
        "starvation_bins" => config.starvation_bins = num(key, value)?,
        "optimize_every" => config.optimize_every = num(key, value)?,
        "divergence_distance" => {
            config.divergence_distance = match value {
                "auto" => None,
                v => Some(float(key, v)?),
            }
        }
        "output_rate" => config.output_rate = float(key, value)?,
        "sensor_width" => config.sensor_width = num(key, value)?,
        "sensor_height" => config.sensor_height = num(key, value)?,
        "ls_initial_step" => ls.initial_step = float(key, value)?,
        "ls_contraction" => ls.contraction = float(key, value)?,
        "ls_sufficient_increase" => ls.sufficient_increase = float(key, value)?,
        "ls_max_backtracks" => ls.max_backtracks = num(key, value)?,
        "ls_max_iterations" => ls.max_iterations = num(key, value)?,
        "ls_min_step" => ls.min_step = float(key, value)?,
        "ls_min_relative_gain" => ls.min_relative_gain = float(key, value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

/// Current value of every key, in [`CONFIG_KEYS`] order.
pub fn config_entries(config: &TrackerConfig) -> Vec<(&'static str, String)> {
    let ls = &config.line_search;
    let values = [
        config.diameter.to_string(),
        config.decay.to_string(),
        config.knot_interval.to_string(),
        config.order.to_string(),
        config.max_features.to_string(),
        config.window_knots.to_string(),
        config.adaptive_window.to_string(),
        config.adaptive_knots.to_string(),
        config.signed_polarity.to_string(),
        config.min_events_per_bin.to_string(),
        config.starvation_bins.to_string(),
        config.optimize_every.to_string(),
        config
            .divergence_distance
            .map_or_else(|| "auto".to_string(), |v| v.to_string()),
        config.output_rate.to_string(),
        config.sensor_width.to_string(),
        config.sensor_height.to_string(),
        ls.initial_step.to_string(),
        ls.contraction.to_string(),
        ls.sufficient_increase.to_string(),
        ls.max_backtracks.to_string(),
        ls.max_iterations.to_string(),
        ls.min_step.to_string(),
        ls.min_relative_gain.to_string(),
    ];
    CONFIG_KEYS.iter().map(|(k, _)| *k).zip(values).collect()
}

/// Applies `key = value` lines on top of `base`. Unknown keys are fatal;
/// the result is validated.
pub fn parse_config(text: &str, base: TrackerConfig) -> Result<TrackerConfig, ParseError> {
    let mut config = base;
    for (n, line) in content_lines(text) {
        let line = line.split('#').next().unwrap_or("").trim();
        let Some((key, value)) = line.split_once('=') else {
            return Err(malformed(n, "expected `key = value`"));
        };
        let (key, value) = (key.trim(), value.trim());
        match set_config_key(&mut config, key, value) {
            Ok(true) => {}
            Ok(false) => {
                return Err(ParseError::UnknownKey {
                    line: n,
                    key: key.to_string(),
                })
            }
            Err(m) => return Err(malformed(n, m)),
        }
    }
    config
        .validate()
        .map_err(|e| ParseError::Invalid(e.to_string()))?;
    Ok(config)
}

pub fn write_config(config: &TrackerConfig) -> String {
    let mut s = String::new();
    for (k, v) in config_entries(config) {
        writeln!(s, "{k} = {v}").unwrap();
    }
    s
}
