#![no_main]

use libfuzzer_sys::fuzz_target;

use masklid::mask::MaskLIDConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let mut cfg = MaskLIDConfig::default();
        if cfg.apply_str(text).is_ok() && cfg.validate().is_ok() {
            assert!(cfg.beta > cfg.alpha);
            assert!(cfg.alpha >= 1 && cfg.lambda >= 1);
        }
    }
});
