#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(sentences) = masklid::eval::parse_jsonl(text) {
            for s in &sentences {
                // Accepted records satisfy the ingestion invariants.
                assert!(!s.gold.is_empty());
                assert!(!s.text.trim().is_empty());
            }
            let _ = masklid::eval::preprocess(sentences);
        }
    }
});
