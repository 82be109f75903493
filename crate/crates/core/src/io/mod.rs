//! Plain-text formats.
//!
//! Every writer uses fixed formatting, so identical inputs give
//! byte-identical files. Parsers report the 1-based line number of the first
//! malformed line.

mod config;
mod detect;
mod events;
mod grid;
mod scene;
mod seeds;
mod tracks;

use thiserror::Error;

pub use config::{config_entries, parse_config, set_config_key, write_config, CONFIG_KEYS};
pub use detect::{detect_harris, event_count_image, harris_response, HarrisParams};
pub use events::{parse_events, write_events, ParsedEvents};
pub use grid::write_grid;
pub use scene::{parse_scene, write_scene};
pub use seeds::{parse_seeds, write_seeds};
pub use tracks::{parse_tracks, write_tracks, TrackRecordSet, TRACKS_HEADER};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("unknown key `{key}` on line {line}")]
    UnknownKey { line: usize, key: String },
    #[error("{0}")]
    Invalid(String),
}

pub(crate) fn malformed(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Malformed {
        line,
        message: message.into(),
    }
}

/// Non-blank, non-comment lines with their 1-based numbers.
pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.trim();
        (!l.is_empty() && !l.starts_with('#')).then_some((i + 1, l))
    })
}

pub(crate) fn parse_f64(field: &str, line: usize, what: &str) -> Result<f64, ParseError> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(malformed(line, format!("bad {what} `{field}`"))),
    }
}
