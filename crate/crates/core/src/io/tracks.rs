use std::collections::BTreeMap;
use std::fmt::Write;

use crate::tracker::{FeatureTrack, TrackSample};

use super::{content_lines, malformed, parse_f64, ParseError};

pub const TRACKS_HEADER: &str = "feature_id,t,x,y,angle";

/// Tracks of one method, keyed by feature id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackRecordSet {
    pub label: String,
    /// Per-feature samples with strictly increasing times.
    pub tracks: BTreeMap<usize, Vec<TrackSample>>,
}

impl TrackRecordSet {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            tracks: BTreeMap::new(),
        }
    }

    pub fn from_tracks(label: impl Into<String>, tracks: &[FeatureTrack]) -> Self {
        Self {
            label: label.into(),
            tracks: tracks
                .iter()
                .filter(|t| !t.samples.is_empty())
                .map(|t| (t.id, t.samples.clone()))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(TRACKS_HEADER);
        s.push('\n');
        for (id, samples) in &self.tracks {
            write_rows(&mut s, *id, samples);
        }
        s
    }
}

fn write_rows(s: &mut String, id: usize, samples: &[TrackSample]) {
    for p in samples {
        writeln!(
            s,
            "{id},{:.9},{:.9},{:.9},{:.9}",
            p.t, p.position[0], p.position[1], p.angle
        )
        .unwrap();
    }
}

/// Writes tracks ordered by feature id, then time.
pub fn write_tracks(tracks: &[FeatureTrack]) -> String {
    let mut order: Vec<&FeatureTrack> = tracks.iter().collect();
    order.sort_by_key(|t| t.id);
    let mut s = String::new();
    s.push_str(TRACKS_HEADER);
    s.push('\n');
    for t in order {
        write_rows(&mut s, t.id, &t.samples);
    }
    s
}

/// Parses a tracks CSV. The header is required; the angle column is
/// optional and reads as 0 when absent.
pub fn parse_tracks(text: &str, label: impl Into<String>) -> Result<TrackRecordSet, ParseError> {
    let mut lines = content_lines(text);
    let with_angle = match lines.next() {
        Some((_, h)) if h.replace(' ', "") == TRACKS_HEADER => true,
        Some((_, h)) if h.replace(' ', "") == "feature_id,t,x,y" => false,
        Some((n, _)) => return Err(malformed(n, format!("expected header `{TRACKS_HEADER}`"))),
        None => return Err(malformed(1, "missing header")),
    };
    let width = if with_angle { 5 } else { 4 };
    let mut set = TrackRecordSet::new(label);
    for (n, line) in lines {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != width {
            return Err(malformed(n, format!("expected {width} fields, got {}", f.len())));
        }
        let id: usize = f[0]
            .parse()
            .map_err(|_| malformed(n, format!("bad feature id `{}`", f[0])))?;
        let sample = TrackSample {
            t: parse_f64(f[1], n, "time")?,
            position: [parse_f64(f[2], n, "x")?, parse_f64(f[3], n, "y")?],
            angle: if with_angle { parse_f64(f[4], n, "angle")? } else { 0.0 },
        };
        let samples = set.tracks.entry(id).or_default();
        if let Some(last) = samples.last() {
            if sample.t <= last.t {
                return Err(malformed(
                    n,
                    format!("feature {id}: time {} does not increase", f[1]),
                ));
            }
        }
        samples.push(sample);
    }
    Ok(set)
}
