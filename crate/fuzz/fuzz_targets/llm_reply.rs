#![no_main]

use libfuzzer_sys::fuzz_target;

use persona_core::generate::prompt::{parse_compile, parse_extraction};

fuzz_target!(|data: &str| {
    let _ = parse_extraction(data);
    let _ = parse_compile(data);
});
