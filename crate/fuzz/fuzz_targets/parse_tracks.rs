#![no_main]

use evtrack_core::io::parse_tracks;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let Ok(set) = parse_tracks(data, "fuzz") else {
        return;
    };
    for samples in set.tracks.values() {
        assert!(samples.windows(2).all(|w| w[0].t < w[1].t));
    }
    // Samples closer than the written precision may merge, so only a
    // successful re-parse is compared.
    if let Ok(again) = parse_tracks(&set.to_csv(), "fuzz") {
        assert_eq!(again.tracks.len(), set.tracks.len());
        for (id, samples) in &set.tracks {
            assert_eq!(again.tracks[id].len(), samples.len());
        }
    }
});
