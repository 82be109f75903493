use std::fmt::Write;

use crate::patch::{Event, Polarity};

use super::{content_lines, malformed, parse_f64, ParseError};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedEvents {
    /// Time-sorted; ties keep file order.
    pub events: Vec<Event>,
    /// Lines whose timestamp was smaller than the previous line's.
    pub out_of_order: usize,
}

/// Parses `t x y p` lines (`p` is 0 or 1).
///
/// Out-of-order timestamps are not fatal: they are counted and the stream is
/// stably sorted.
pub fn parse_events(text: &str) -> Result<ParsedEvents, ParseError> {
    let mut events = Vec::with_capacity(text.len() / 20);
    let mut out_of_order = 0;
    let mut last = f64::NEG_INFINITY;
    for (n, line) in content_lines(text) {
        let mut it = line.split_ascii_whitespace();
        let (Some(t), Some(x), Some(y), Some(p), None) =
            (it.next(), it.next(), it.next(), it.next(), it.next())
        else {
            return Err(malformed(n, "expected `t x y p`"));
        };
        let t = parse_f64(t, n, "timestamp")?;
        let x = parse_f64(x, n, "x")?;
        let y = parse_f64(y, n, "y")?;
        let polarity = match p {
            "0" => Polarity::Negative,
            "1" => Polarity::Positive,
            _ => return Err(malformed(n, format!("polarity must be 0 or 1, got `{p}`"))),
        };
        if t < last {
            out_of_order += 1;
        }
        last = last.max(t);
        events.push(Event::new(t, [x, y], polarity));
    }
    if out_of_order > 0 {
        log::warn!("{out_of_order} events out of time order; sorting");
        events.sort_by(|a, b| a.t.total_cmp(&b.t));
    }
    Ok(ParsedEvents {
        events,
        out_of_order,
    })
}

pub fn write_events(events: &[Event]) -> String {
    let mut s = String::with_capacity(events.len() * 24);
    for e in events {
        let p = match e.polarity {
            Polarity::Negative => 0,
            Polarity::Positive => 1,
        };
        writeln!(s, "{:.9} {} {} {}", e.t, e.x[0], e.x[1], p).unwrap();
    }
    s
}
