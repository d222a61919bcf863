#![no_main]

use libfuzzer_sys::fuzz_target;

use persona_core::generate::prompt::{COMPILE_SCHEMA, EXTRACT_SCHEMA};
use persona_core::generate::{LlmProvider, ScriptedLlm};

// The scripted provider parses evidence and record sections out of prompts.
fuzz_target!(|data: &str| {
    let _ = ScriptedLlm.generate(data, EXTRACT_SCHEMA);
    let _ = ScriptedLlm.generate(data, COMPILE_SCHEMA);
});
