#![no_main]

use evtrack_core::io::{parse_config, write_config};
use evtrack_core::TrackerConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(config) = parse_config(data, TrackerConfig::default()) {
        let again = parse_config(&write_config(&config), TrackerConfig::default())
            .expect("written config parses");
        assert_eq!(again, config);
    }
});
