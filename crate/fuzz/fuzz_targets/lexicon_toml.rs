#![no_main]

use libfuzzer_sys::fuzz_target;

use persona_core::curation::{match_dimensions, KeywordLexicon};

fuzz_target!(|data: &str| {
    if let Ok(lexicon) = KeywordLexicon::from_toml_str(data) {
        let _ = match_dimensions("the motion made me feel sick and the subtitles were tiny", &lexicon);
    }
});
