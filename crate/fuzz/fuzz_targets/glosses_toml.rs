#![no_main]

use libfuzzer_sys::fuzz_target;

use persona_core::generate::DimensionGlosses;

fuzz_target!(|data: &str| {
    let _ = DimensionGlosses::from_toml_str(data);
});
