#![no_main]

use evtrack_core::io::{parse_events, write_events};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let Ok(parsed) = parse_events(data) else {
        return;
    };
    assert!(parsed.events.windows(2).all(|w| w[0].t <= w[1].t));
    // Timestamps are written with nine decimals; coordinates exactly.
    let again = parse_events(&write_events(&parsed.events)).expect("written events parse");
    assert_eq!(again.events.len(), parsed.events.len());
    assert_eq!(again.out_of_order, 0);
    for (a, b) in parsed.events.iter().zip(&again.events) {
        assert_eq!(a.x, b.x);
        assert_eq!(a.polarity, b.polarity);
        assert!((a.t - b.t).abs() <= 1e-9_f64.max(a.t.abs() * 1e-15));
    }
});
