#![no_main]

use libfuzzer_sys::fuzz_target;

use persona_core::session::replay_events;

fuzz_target!(|data: &str| {
    if let Ok(session) = replay_events(data) {
        assert!(session.is_consistent());
    }
});
