#![no_main]

use libfuzzer_sys::fuzz_target;

use persona_core::session::classify_turn;

fuzz_target!(|data: &str| {
    let turn = classify_turn(data);
    assert_eq!(turn.text, data);
});
