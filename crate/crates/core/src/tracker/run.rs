use rayon::prelude::*;

use crate::geometry::Vec2;
use crate::patch::Event;

use super::feature::{FeatureState, FeatureStats, FeatureTrack, TerminationReason};
use super::{TrackerConfig, TrackerError};

/// A feature seed: where and when to start tracking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Seed {
    pub t: f64,
    pub position: Vec2,
}

impl Seed {
    pub fn new(t: f64, position: Vec2) -> Self {
        Self { t, position }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSummary {
    pub id: usize,
    pub seed: Seed,
    pub end_time: f64,
    pub termination: TerminationReason,
    pub stats: FeatureStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    OutOfBounds,
    BudgetExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RejectedSeed {
    pub id: usize,
    pub seed: Seed,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOutput {
    /// One track per accepted seed, ordered by feature id.
    pub tracks: Vec<FeatureTrack>,
    pub summaries: Vec<FeatureSummary>,
    pub rejected: Vec<RejectedSeed>,
}

enum Outcome {
    Tracked(FeatureTrack, FeatureSummary),
    Rejected(RejectedSeed),
}

fn track_one(
    id: usize,
    seed: Seed,
    events: &[Event],
    config: &TrackerConfig,
) -> Result<Outcome, TrackerError> {
    let mut state = match FeatureState::spawn(id, seed.position, seed.t, config, 0) {
        Ok(s) => s,
        Err(TrackerError::SeedOutOfBounds { .. }) => {
            return Ok(Outcome::Rejected(RejectedSeed {
                id,
                seed,
                reason: RejectReason::OutOfBounds,
            }))
        }
        Err(e) => return Err(e),
    };
    let start = events.partition_point(|e| e.t < seed.t);
    for e in &events[start..] {
        state.feed(e)?;
        if !state.is_active() {
            break;
        }
    }
    let (track, stats) = state.finish();
    let end_time = track.samples.last().map_or(seed.t, |s| s.t);
    let summary = FeatureSummary {
        id,
        seed,
        end_time,
        termination: track.termination,
        stats,
    };
    Ok(Outcome::Tracked(track, summary))
}

/// Tracks every seed through a time-sorted event stream.
///
/// Features are independent, so they are processed in parallel on the
/// current rayon pool; the output does not depend on the thread count. The
/// feature budget is applied afterwards in seed order: a seed is rejected
/// when `max_features` earlier features are still alive at its spawn time.
/// Feature ids are seed indices.
pub fn run(events: &[Event], seeds: &[Seed], config: &TrackerConfig) -> Result<RunOutput, TrackerError> {
    config.validate()?;
    if seeds.is_empty() {
        return Err(TrackerError::NoSeeds);
    }
    if let Some(i) = events.windows(2).position(|w| w[1].t < w[0].t) {
        return Err(TrackerError::UnsortedStream { index: i + 1 });
    }

    let outcomes: Vec<Outcome> = seeds
        .par_iter()
        .enumerate()
        .map(|(id, seed)| track_one(id, *seed, events, config))
        .collect::<Result<_, _>>()?;

    let mut order: Vec<usize> = (0..seeds.len()).collect();
    order.sort_by(|&a, &b| seeds[a].t.total_cmp(&seeds[b].t).then(a.cmp(&b)));
    let mut accepted = vec![false; seeds.len()];
    let mut alive_until: Vec<f64> = Vec::new();
    for &i in &order {
        if let Outcome::Tracked(_, summary) = &outcomes[i] {
            let t = seeds[i].t;
            let alive = alive_until.iter().filter(|&&end| end > t).count();
            if alive < config.max_features {
                accepted[i] = true;
                alive_until.push(summary.end_time.max(t + f64::EPSILON));
            }
        }
    }

    let mut out = RunOutput::default();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Outcome::Tracked(track, summary) if accepted[i] => {
                out.tracks.push(track);
                out.summaries.push(summary);
            }
            Outcome::Tracked(..) => out.rejected.push(RejectedSeed {
                id: i,
                seed: seeds[i],
                reason: RejectReason::BudgetExhausted,
            }),
            Outcome::Rejected(r) => out.rejected.push(r),
        }
    }
    Ok(out)
}
