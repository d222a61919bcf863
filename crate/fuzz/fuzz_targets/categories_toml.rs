#![no_main]

use libfuzzer_sys::fuzz_target;

use persona_core::curation::CategoryRules;

fuzz_target!(|data: &str| {
    let _ = CategoryRules::from_toml_str(data);
});
