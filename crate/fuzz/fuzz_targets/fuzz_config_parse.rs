#![no_main]

use libfuzzer_sys::fuzz_target;
use mec_core::scenario::SimConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    // Anything accepted must survive a round trip through TOML unchanged.
    if let Ok(cfg) = SimConfig::from_toml_str(text) {
        let again = SimConfig::from_toml_str(&cfg.to_toml_string()).expect("re-parse of serialised config");
        assert_eq!(cfg, again);
    }
});
