#![no_main]

use std::sync::OnceLock;

use libfuzzer_sys::fuzz_target;

use masklid::inference::{parse_label_lines, restrict_labels};
use masklid::model::{fixture::three_language_fixture, ClassifierModel};

fn model() -> &'static ClassifierModel {
    static MODEL: OnceLock<ClassifierModel> = OnceLock::new();
    MODEL.get_or_init(three_language_fixture)
}

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let names = parse_label_lines(text);
        if let Ok(restriction) = restrict_labels(model(), &names) {
            assert!(!restriction.subset.is_empty());
            let mut seen = std::collections::HashSet::new();
            for &ix in restriction.subset.indices() {
                assert!(ix < model().dictionary().nlabels());
                assert!(seen.insert(ix), "duplicate index in subset");
            }
        }
    }
});
