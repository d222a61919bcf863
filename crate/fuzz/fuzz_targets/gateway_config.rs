#![no_main]

use libfuzzer_sys::fuzz_target;

use persona_gateway::config::GatewayConfig;

fuzz_target!(|data: &str| {
    if let Ok(cfg) = toml::from_str::<GatewayConfig>(data) {
        let _ = cfg.validate();
    }
});
