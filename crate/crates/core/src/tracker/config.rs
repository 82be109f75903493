use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        reason: reason.into(),
    }
}

/// Backtracking steepest-ascent parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchConfig {
    /// Largest knot displacement of the first trial step (px).
    pub initial_step: f64,
    pub contraction: f64,
    /// Armijo sufficient-increase constant.
    pub sufficient_increase: f64,
    pub max_backtracks: usize,
    pub max_iterations: usize,
    /// Stop when the accepted step's largest displacement falls below this (px).
    pub min_step: f64,
    pub min_relative_gain: f64,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            contraction: 0.5,
            sufficient_increase: 1e-4,
            max_backtracks: 20,
            max_iterations: 50,
            min_step: 1e-3,
            min_relative_gain: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    /// Patch diameter `d` (odd, px).
    pub diameter: usize,
    /// History decay `ρ`.
    pub decay: f64,
    /// Knot spacing `Δt` (s).
    pub knot_interval: f64,
    pub order: usize,
    pub max_features: usize,
    /// Optimized knots per window, `m`.
    pub window_knots: usize,
    /// Grow the window to `adaptive_knots` while the window holds fewer than
    /// `⌊d²/4⌋` events.
    pub adaptive_window: bool,
    pub adaptive_knots: usize,
    pub signed_polarity: bool,
    pub min_events_per_bin: usize,
    pub starvation_bins: usize,
    /// Re-optimize after this many newly accepted events.
    pub optimize_every: usize,
    /// Largest knot displacement of one optimization call before the track
    /// counts as diverged (px); `None` means `d/2`.
    pub divergence_distance: Option<f64>,
    pub line_search: LineSearchConfig,
    /// Track output sample rate (Hz).
    pub output_rate: f64,
    pub sensor_width: u32,
    pub sensor_height: u32,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            diameter: 31,
            decay: 0.9,
            knot_interval: 0.050,
            order: 3,
            max_features: 60,
            window_knots: 2,
            adaptive_window: false,
            adaptive_knots: 3,
            signed_polarity: false,
            min_events_per_bin: 5,
            starvation_bins: 2,
            optimize_every: 200,
            divergence_distance: None,
            line_search: LineSearchConfig::default(),
            output_rate: 100.0,
            sensor_width: 240,
            sensor_height: 180,
        }
    }
}

impl TrackerConfig {
    pub fn radius(&self) -> f64 {
        ((self.diameter - 1) / 2) as f64
    }

    /// `⌊d²/4⌋`, the event count below which the adaptive window grows.
    pub fn adaptive_threshold(&self) -> usize {
        self.diameter * self.diameter / 4
    }

    pub fn divergence_limit(&self) -> f64 {
        self.divergence_distance
            .unwrap_or(self.diameter as f64 / 2.0)
    }

    /// Bins kept unfolded.
    pub fn retained_bins(&self) -> usize {
        if self.adaptive_window {
            self.window_knots.max(self.adaptive_knots)
        } else {
            self.window_knots
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.diameter < 3 || self.diameter % 2 == 0 {
            return Err(invalid("diameter", "must be odd and at least 3"));
        }
        if !(0.0..=1.0).contains(&self.decay) {
            return Err(invalid("decay", "must be in [0, 1]"));
        }
        if !(self.knot_interval.is_finite() && self.knot_interval > 0.0) {
            return Err(invalid("knot_interval", "must be positive"));
        }
        if !(2..=crate::geometry::MAX_ORDER).contains(&self.order) {
            return Err(invalid(
                "order",
                format!("must be in 2..={}", crate::geometry::MAX_ORDER),
            ));
        }
        if self.max_features == 0 {
            return Err(invalid("max_features", "must be at least 1"));
        }
        if self.window_knots == 0 {
            return Err(invalid("window_knots", "must be at least 1"));
        }
        if self.adaptive_knots == 0 {
            return Err(invalid("adaptive_knots", "must be at least 1"));
        }
        if self.starvation_bins == 0 {
            return Err(invalid("starvation_bins", "must be at least 1"));
        }
        if self.optimize_every == 0 {
            return Err(invalid("optimize_every", "must be at least 1"));
        }
        if let Some(d) = self.divergence_distance {
            if !(d > 0.0) {
                return Err(invalid("divergence_distance", "must be positive"));
            }
        }
        let ls = &self.line_search;
        if !(ls.initial_step > 0.0) {
            return Err(invalid("ls_initial_step", "must be positive"));
        }
        if !(ls.contraction > 0.0 && ls.contraction < 1.0) {
            return Err(invalid("ls_contraction", "must be in (0, 1)"));
        }
        if !(0.0..1.0).contains(&ls.sufficient_increase) {
            return Err(invalid("ls_sufficient_increase", "must be in [0, 1)"));
        }
        if !(ls.min_step >= 0.0) {
            return Err(invalid("ls_min_step", "must be non-negative"));
        }
        if !(ls.min_relative_gain >= 0.0) {
            return Err(invalid("ls_min_relative_gain", "must be non-negative"));
        }
        if !(self.output_rate.is_finite() && self.output_rate > 0.0) {
            return Err(invalid("output_rate", "must be positive"));
        }
        if self.sensor_width == 0 || self.sensor_height == 0 {
            return Err(invalid("sensor_width", "sensor size must be nonzero"));
        }
        Ok(())
    }
}
