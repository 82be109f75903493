#![no_main]

use evtrack_core::io::{parse_scene, write_scene};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(spec) = parse_scene(data) {
        let again = parse_scene(&write_scene(&spec)).expect("written scene parses");
        assert_eq!(again, spec);
    }
});
