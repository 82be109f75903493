#![no_main]

use evtrack_core::io::{parse_seeds, write_seeds};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let Ok(seeds) = parse_seeds(data) else {
        return;
    };
    assert!(seeds.windows(2).all(|w| w[0].t <= w[1].t));
    let again = parse_seeds(&write_seeds(&seeds)).expect("written seeds parse");
    assert_eq!(again.len(), seeds.len());
});
