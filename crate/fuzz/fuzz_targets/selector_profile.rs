#![no_main]

use libfuzzer_sys::fuzz_target;

use persona_core::ingest::SelectorProfile;

fuzz_target!(|data: &str| {
    if let Ok(p) = SelectorProfile::from_toml_str(data) {
        let _ = p.page_url("4100001");
    }
});
