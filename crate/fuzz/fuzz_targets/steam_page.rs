#![no_main]

use libfuzzer_sys::fuzz_target;

use persona_core::ingest::parse_steam_page;

fuzz_target!(|data: &str| {
    let _ = parse_steam_page(data);
});
