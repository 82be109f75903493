use std::fmt::Write;

use crate::tracker::Seed;

use super::{content_lines, malformed, parse_f64, ParseError};

/// Parses `t x y` lines, sorted by time (stable, duplicates kept).
pub fn parse_seeds(text: &str) -> Result<Vec<Seed>, ParseError> {
    let mut seeds = Vec::new();
    for (n, line) in content_lines(text) {
        let fields: Vec<&str> = line.split_ascii_whitespace().collect();
        let [t, x, y] = fields[..] else {
            return Err(malformed(n, "expected `t x y`"));
        };
        seeds.push(Seed::new(
            parse_f64(t, n, "time")?,
            [parse_f64(x, n, "x")?, parse_f64(y, n, "y")?],
        ));
    }
    seeds.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(seeds)
}

pub fn write_seeds(seeds: &[Seed]) -> String {
    let mut s = String::new();
    for seed in seeds {
        writeln!(
            s,
            "{:.9} {:.9} {:.9}",
            seed.t, seed.position[0], seed.position[1]
        )
        .unwrap();
    }
    s
}
