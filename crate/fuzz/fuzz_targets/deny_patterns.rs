#![no_main]

use libfuzzer_sys::fuzz_target;

use persona_core::curation::parse_patterns;

fuzz_target!(|data: &str| {
    for p in parse_patterns(data) {
        assert!(!p.is_empty());
    }
});
