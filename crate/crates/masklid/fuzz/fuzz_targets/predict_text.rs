#![no_main]

use std::sync::OnceLock;

use libfuzzer_sys::fuzz_target;

use masklid::inference::{featurize, predict, LabelSubset};
use masklid::mask::{masklid_traced, MaskLIDConfig};
use masklid::model::{fixture::FixtureBuilder, ClassifierModel};

// A model with character n-grams and word bigrams enabled, so arbitrary
// text drives the full hashing pipeline.
fn model() -> &'static (ClassifierModel, LabelSubset) {
    static MODEL: OnceLock<(ClassifierModel, LabelSubset)> = OnceLock::new();
    MODEL.get_or_init(|| {
        let model = FixtureBuilder::new(4, 64)
            .words(&["</s>", "merhaba", "dünya", "kahve", "falling", "love", "shop"])
            .labels(&["lang_x", "lang_y", "lang_z"])
            .char_ngrams(2, 4)
            .word_ngrams(2)
            .seed(3)
            .build()
            .unwrap();
        let subset = LabelSubset::full(&model);
        (model, subset)
    })
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let (model, subset) = model();

    if let Ok(features) = featurize(text, model) {
        for w in &features.words {
            for &id in &w.feature_ids {
                assert!(id < model.input().rows());
            }
        }
        if let Ok(prediction) = predict(&features, model, subset) {
            let total: f32 = prediction.ranked().iter().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-4, "probabilities sum to {total}");
        }
    }

    let cfg = MaskLIDConfig {
        alpha: 1,
        beta: 2,
        tau: 4,
        lambda: 3,
        feature_set_confidence: 0.5,
        beta_retry_factor: 2,
        step1_confidence: None,
    };
    if let Ok((prediction, trace)) = masklid_traced(text, model, subset, &cfg) {
        assert!(trace.len() <= cfg.lambda);
        let mut labels = std::collections::HashSet::new();
        for a in &prediction.assignments {
            assert!(labels.insert(a.label), "duplicate language emitted");
            assert!(a.byte_len >= cfg.tau);
            assert!(a.probability >= cfg.feature_set_confidence);
        }
        let mut prev: Option<Vec<bool>> = None;
        for round in &trace {
            if let Some(p) = &prev {
                for (a, b) in p.iter().zip(&round.masked_after) {
                    assert!(!(*a && !*b), "mask flag dropped");
                }
            }
            prev = Some(round.masked_after.clone());
        }
    }
});
