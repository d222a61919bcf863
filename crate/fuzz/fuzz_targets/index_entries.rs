#![no_main]

use libfuzzer_sys::fuzz_target;

use persona_core::index::{parse_entry_line, VectorIndex};

fuzz_target!(|data: &str| {
    let mut dim = 4;
    for (i, line) in data.lines().enumerate() {
        if let (0, Ok(record)) = (i, parse_entry_line(line)) {
            dim = record.vector.len();
        }
    }
    let mut manifest = VectorIndex::new(dim, "hash-bow-64").manifest();
    manifest.count = data.lines().filter(|l| !l.trim().is_empty()).count();
    let _ = VectorIndex::from_parts(&manifest, data);
});
