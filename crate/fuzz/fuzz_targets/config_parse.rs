#![no_main]

use hffd::harness::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let mut cfg = ExperimentConfig::default();
        if cfg.apply_text(text).is_ok() {
            let _ = cfg.validate();
            let _ = cfg.echo();
        }
    }
});
