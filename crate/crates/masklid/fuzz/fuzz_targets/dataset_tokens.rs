#![no_main]

use libfuzzer_sys::fuzz_target;

use masklid::eval::{parse_token_per_line, LabelMap};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_token_per_line(text, None);
        if let Ok(map) = LabelMap::parse(text) {
            let _ = parse_token_per_line(text, Some(&map));
        }
    }
});
