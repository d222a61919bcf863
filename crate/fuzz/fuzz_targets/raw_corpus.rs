#![no_main]

use libfuzzer_sys::fuzz_target;

use std::path::Path;

use persona_core::ingest::RawReview;
use persona_core::jsonl::parse_jsonl;

fuzz_target!(|data: &str| {
    let _ = parse_jsonl::<RawReview>(data, Path::new("fuzz.jsonl"));
});
