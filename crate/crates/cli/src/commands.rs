use std::path::{Path, PathBuf};

use evtrack_core::eval::{
    compute_metrics, tracks_alive_series, write_alive_csv, write_feature_csv, write_metrics_csv,
};
use evtrack_core::io::{
    config_entries, detect_harris, parse_config, parse_events, parse_scene, parse_seeds,
    parse_tracks, set_config_key, write_events, write_scene, write_seeds, write_tracks,
    HarrisParams, TrackRecordSet,
};
use evtrack_core::tracker::{FeatureStats, RejectReason, TrackerError};
use evtrack_core::{run, Event, Seed, TrackerConfig};
use serde_json::{json, Map, Value};

use crate::output::Artifacts;
use crate::{DetectArgs, EvalArgs, Failure, SynthArgs, TrackArgs};

fn bad_file(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Input(format!("{}: {e}", path.display()))
}

fn load_events(art: &mut Artifacts, path: &Path) -> Result<Vec<Event>, Failure> {
    let text = art.input("events", path)?;
    let parsed = parse_events(&text).map_err(|e| bad_file(path, e))?;
    art.set("events_out_of_order", json!(parsed.out_of_order));
    art.set("event_count", json!(parsed.events.len()));
    Ok(parsed.events)
}

fn seed_json(s: &Seed) -> Value {
    json!({ "t": s.t, "x": s.position[0], "y": s.position[1] })
}

fn stats_json(s: &FeatureStats) -> Value {
    json!({
        "events_accepted": s.events_accepted,
        "events_dropped": s.events_dropped,
        "knots_appended": s.knots_appended,
        "bins_folded": s.bins_folded,
        "optimize_calls": s.optimize_calls,
        "bootstrap_calls": s.bootstrap_calls,
        "line_search_iterations": s.line_search_iterations,
        "objective_evaluations": s.objective_evaluations,
        "base_window_below_threshold": s.base_window_below_threshold,
        "base_window_at_or_above_threshold": s.base_window_at_or_above_threshold,
        "extended_window_below_threshold": s.extended_window_below_threshold,
        "extended_window_at_or_above_threshold": s.extended_window_at_or_above_threshold,
    })
}

/// Field-wise sum of the per-feature counters.
fn sum_stats(stats: &[Value]) -> Value {
    let mut total = Map::new();
    for s in stats {
        for (k, v) in s.as_object().into_iter().flatten() {
            let acc = total.entry(k.clone()).or_insert(json!(0u64));
            *acc = json!(acc.as_u64().unwrap_or(0) + v.as_u64().unwrap_or(0));
        }
    }
    Value::Object(total)
}

fn config_json(config: &TrackerConfig) -> Value {
    Value::Object(
        config_entries(config)
            .into_iter()
            .map(|(k, v)| (k.to_string(), Value::String(v)))
            .collect(),
    )
}

/// Defaults, then the config file, then command-line flags.
fn resolve_config(
    art: &mut Artifacts,
    file: Option<&PathBuf>,
    overrides: &[(&str, String)],
) -> Result<TrackerConfig, Failure> {
    // Bad flag values are usage errors, reported before any file is read.
    let mut scratch = TrackerConfig::default();
    for (key, value) in overrides {
        if let Err(m) = set_config_key(&mut scratch, key, value) {
            return Err(Failure::Usage(format!("--{}: {m}", key.replace('_', "-"))));
        }
    }
    let mut config = TrackerConfig::default();
    if let Some(path) = file {
        let text = art.input("config", path)?;
        config = parse_config(&text, config).map_err(|e| bad_file(path, e))?;
    }
    for (key, value) in overrides {
        let flag = key.replace('_', "-");
        match set_config_key(&mut config, key, value) {
            Ok(true) => {}
            Ok(false) => return Err(Failure::Internal(format!("flag --{flag} has no config key"))),
            Err(m) => return Err(Failure::Usage(format!("--{flag}: {m}"))),
        }
    }
    config
        .validate()
        .map_err(|e| Failure::Usage(format!("invalid configuration: {e}")))?;
    Ok(config)
}

fn tracker_failure(e: TrackerError) -> Failure {
    match e {
        TrackerError::NoSeeds | TrackerError::Config(_) => Failure::Input(e.to_string()),
        // Parsed streams are sorted and seeds are screened per feature, so
        // anything else is a broken invariant.
        _ => Failure::Internal(e.to_string()),
    }
}

pub fn track(args: &TrackArgs, overrides: &[(&str, String)], threads: usize) -> Result<(), Failure> {
    let mut art = Artifacts::new("track");
    let config = resolve_config(&mut art, args.config.as_ref(), overrides)?;
    let events = load_events(&mut art, &args.events)?;
    let seeds_text = art.input("seeds", &args.seeds)?;
    let seeds = parse_seeds(&seeds_text).map_err(|e| bad_file(&args.seeds, e))?;

    let out = run(&events, &seeds, &config).map_err(tracker_failure)?;

    let stats: Vec<Value> = out.summaries.iter().map(|s| stats_json(&s.stats)).collect();
    let features: Vec<Value> = out
        .summaries
        .iter()
        .zip(&out.tracks)
        .zip(&stats)
        .map(|((s, t), st)| {
            json!({
                "id": s.id,
                "seed": seed_json(&s.seed),
                "end_time": s.end_time,
                "termination": s.termination.as_str(),
                "samples": t.samples.len(),
                "stats": st,
            })
        })
        .collect();
    let rejected: Vec<Value> = out
        .rejected
        .iter()
        .map(|r| {
            let reason = match r.reason {
                RejectReason::OutOfBounds => "out_of_bounds",
                RejectReason::BudgetExhausted => "budget_exhausted",
            };
            json!({ "id": r.id, "seed": seed_json(&r.seed), "reason": reason })
        })
        .collect();
    for r in &out.rejected {
        log::warn!("seed {} rejected: {:?}", r.id, r.reason);
    }

    art.set("config", config_json(&config));
    art.set("adaptive_window", json!(config.adaptive_window));
    art.set("threads", json!(threads));
    art.set("counters", sum_stats(&stats));
    art.set("features", Value::Array(features));
    art.set("rejected", Value::Array(rejected));
    art.file("tracks.csv", write_tracks(&out.tracks));
    art.commit(&args.out)
}

pub fn synth(args: &SynthArgs) -> Result<(), Failure> {
    let mut art = Artifacts::new("synth");
    let text = art.input("scene", &args.scene)?;
    let mut spec = parse_scene(&text).map_err(|e| bad_file(&args.scene, e))?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let out = evtrack_core::synthetic::generate(&spec).map_err(|e| bad_file(&args.scene, e))?;

    art.set("scene", json!(write_scene(&spec)));
    art.set("event_count", json!(out.events.len()));
    art.set("feature_count", json!(out.ground_truth.len()));
    art.file("events.txt", write_events(&out.events));
    art.file("gt_tracks.csv", write_tracks(&out.ground_truth));
    art.file("seeds.txt", write_seeds(&out.seeds));
    art.commit(&args.out)
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "tracks".to_string(), |s| s.to_string_lossy().into_owned())
}

/// `label=path`, or a bare path labelled by its file stem.
fn method_spec(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((label, path)) if !label.is_empty() && !label.contains(['/', '\\']) => {
            (label.to_string(), PathBuf::from(path))
        }
        _ => {
            let path = PathBuf::from(spec);
            (file_stem(&path), path)
        }
    }
}

/// `start, start + step, …` up to `end`, computed by index so the grid does
/// not accumulate rounding.
fn time_grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step + 1e-9).floor().max(0.0) as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}

pub fn eval(args: &EvalArgs) -> Result<(), Failure> {
    if !(args.th > 0.0 && args.th.is_finite()) {
        return Err(Failure::Usage(format!("--th must be positive, got {}", args.th)));
    }
    if !(args.alive_step > 0.0 && args.alive_step.is_finite()) {
        return Err(Failure::Usage("--alive-step must be positive".into()));
    }
    let mut art = Artifacts::new("eval");
    let gt_text = art.input("ground_truth", &args.gt)?;
    let gt = parse_tracks(&gt_text, "ground_truth").map_err(|e| bad_file(&args.gt, e))?;

    let mut methods: Vec<TrackRecordSet> = Vec::new();
    for spec in &args.methods {
        let (label, path) = method_spec(spec);
        if methods.iter().any(|m| m.label == label) {
            return Err(Failure::Usage(format!("duplicate method label `{label}`")));
        }
        let text = art.input(&format!("method:{label}"), &path)?;
        methods.push(parse_tracks(&text, label).map_err(|e| bad_file(&path, e))?);
    }
    if methods.len() == 1 {
        eprintln!("note: a single method has no common error; that column is left empty");
    }

    let reports = compute_metrics(&methods, &gt, args.th, args.pooled)
        .map_err(|e| Failure::Input(e.to_string()))?;
    let start = gt.tracks.values().filter_map(|s| s.first()).map(|s| s.t).fold(f64::INFINITY, f64::min);
    let end = gt.tracks.values().filter_map(|s| s.last()).map(|s| s.t).fold(f64::NEG_INFINITY, f64::max);
    let grid = if start <= end { time_grid(start, end, args.alive_step) } else { Vec::new() };
    let counts = tracks_alive_series(&methods, &gt, args.th, &grid);
    let labels: Vec<&str> = methods.iter().map(|m| m.label.as_str()).collect();

    let dataset = args.dataset.clone().unwrap_or_else(|| file_stem(&args.gt));
    let summary: Vec<Value> = reports
        .iter()
        .map(|r| {
            json!({
                "method": r.method,
                "features": r.features.len(),
                "unmatched": r.unmatched,
                "excluded": r.excluded,
            })
        })
        .collect();
    art.set("threshold", json!(args.th));
    art.set("pooled", json!(args.pooled));
    art.set("dataset", json!(dataset));
    art.set("methods", Value::Array(summary));
    art.file("metrics.csv", write_metrics_csv(&dataset, &reports));
    art.file("features.csv", write_feature_csv(&reports));
    art.file("alive.csv", write_alive_csv(&labels, &grid, &counts));
    art.commit(&args.out)
}

pub fn detect(args: &DetectArgs) -> Result<(), Failure> {
    if !(args.t1 > args.t0) {
        return Err(Failure::Usage(format!(
            "empty interval: --t1 {} must exceed --t0 {}",
            args.t1, args.t0
        )));
    }
    let mut art = Artifacts::new("detect");
    let events = load_events(&mut art, &args.events)?;
    let params = HarrisParams {
        k: args.harris_k,
        relative_threshold: args.relative_threshold,
        min_distance: args.min_distance,
        border: args.border,
        count: args.count,
    };
    let seeds = detect_harris(&events, args.t0, args.t1, args.width, args.height, &params);

    art.set(
        "detector",
        json!({
            "t0": args.t0,
            "t1": args.t1,
            "width": args.width,
            "height": args.height,
            "count": args.count,
            "min_distance": args.min_distance,
            "border": args.border,
            "harris_k": args.harris_k,
            "relative_threshold": args.relative_threshold,
        }),
    );
    art.set("seed_count", json!(seeds.len()));
    art.file("seeds.txt", write_seeds(&seeds));
    art.commit(&args.out)
}
