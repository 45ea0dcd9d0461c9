#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Arbitrary bytes must never panic or trigger a huge allocation.
    let _ = masklid::model::read_model(&mut &data[..]);
});
