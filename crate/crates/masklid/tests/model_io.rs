//! Loader and featurizer checks against `testdata/tiny.bin`, a fixture
//! written by an independent emitter, plus file-level negative cases and
//! the write/load round-trip property.

use proptest::prelude::*;

use masklid::inference::{featurize, predict, LabelSubset};
use masklid::model::{
    fixture::FixtureBuilder, load_model, read_model, subword_ids, EntryKind, ModelError,
};

fn tiny_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("testdata/tiny.bin")
}

#[test]
fn tiny_fixture_header_and_dictionary() {
    let model = load_model(tiny_path()).unwrap();
    let hp = model.hyperparams();
    assert_eq!((hp.dim, hp.bucket, hp.minn, hp.maxn, hp.word_ngrams), (4, 32, 2, 3, 2));
    let dict = model.dictionary();
    assert_eq!(dict.nwords(), 5);
    assert_eq!(dict.nlabels(), 3);
    let labels: Vec<&str> = dict.labels().collect();
    assert_eq!(labels, vec!["__label__aqu", "__label__bri", "__label__cor"]);
    assert_eq!(dict.entries()[0].surface, "</s>");
    assert_eq!(dict.entries()[0].kind, EntryKind::Word);
    assert_eq!(model.input().rows(), 5 + 32);
    assert_eq!(model.output().rows(), 3);
}

#[test]
fn tiny_fixture_matrix_values() {
    let model = load_model(tiny_path()).unwrap();
    let expect_in0 = [-0.4236917197704315f64, 0.2799187898635864, -0.061590760946273804, 0.2234652042388916];
    for (got, want) in model.input().row(0).iter().zip(expect_in0) {
        assert_eq!(*got, want as f32);
    }
    let expect_in9 = [0.2686474919319153f64, -0.18600532412528992, 0.07262533903121948, -0.22395095229148865];
    for (got, want) in model.input().row(9).iter().zip(expect_in9) {
        assert_eq!(*got, want as f32);
    }
    let expect_out2 = [0.09034585952758789f64, 0.44066137075424194, 0.49255770444869995, -0.25839710235595703];
    for (got, want) in model.output().row(2).iter().zip(expect_out2) {
        assert_eq!(*got, want as f32);
    }
}

#[test]
fn tiny_fixture_feature_ids_match_independent_oracle() {
    let model = load_model(tiny_path()).unwrap();
    let f = featurize("aqua brine", &model).unwrap();
    assert_eq!(f.words.len(), 2);
    assert_eq!(
        f.words[0].feature_ids,
        vec![1, 19, 18, 12, 27, 16, 35, 8, 12, 27]
    );
    assert_eq!(
        f.words[1].feature_ids,
        vec![2, 32, 16, 26, 25, 25, 19, 35, 6, 33, 11, 31]
    );
    // End-of-sentence id, then the two bigrams (second one with the
    // end-of-sentence hash).
    assert_eq!(f.extra_ids, vec![0, 13, 9]);
    assert_eq!(f.total_features(), 25);

    // Out-of-vocabulary word: subword features only.
    let ids = subword_ids("coffee", model.hyperparams(), model.dictionary());
    assert_eq!(ids, vec![13, 10, 12, 24, 13, 15, 18, 29, 25, 8, 36, 24, 31]);
}

#[test]
fn tiny_fixture_predictions_match_independent_oracle() {
    let model = load_model(tiny_path()).unwrap();
    let subset = LabelSubset::full(&model);
    let cases: &[(&str, [f32; 3])] = &[
        ("aqua brine", [0.35122045, 0.33045512, 0.31832438]),
        ("coral coffee", [0.34848812, 0.34078639, 0.31072548]),
        ("drift", [0.3464342, 0.30910688, 0.34445896]),
        ("şarkıya aqua", [0.35071402, 0.34006273, 0.30922323]),
    ];
    for (text, expect) in cases {
        let f = featurize(text, &model).unwrap();
        let p = predict(&f, &model, &subset).unwrap();
        for (label, want) in expect.iter().enumerate() {
            let got = p.probability_of(label).unwrap();
            assert!(
                (got - want).abs() < 1e-6,
                "{text}: label {label} {got} vs {want}"
            );
        }
    }
}

#[test]
fn quantized_flag_is_rejected() {
    let builder = FixtureBuilder::new(4, 16).words(&["aa", "bb"]).labels(&["x", "y"]);
    let mut bytes = builder.to_bytes();
    // The quant flag sits right before the input matrix block.
    let input_block = 16 + (2 + 16) * 4 * 4;
    let output_block = 16 + 2 * 4 * 4;
    let quant_at = bytes.len() - (1 + input_block + 1 + output_block);
    assert_eq!(bytes[quant_at], 0);
    bytes[quant_at] = 1;
    assert!(matches!(
        read_model(&mut &bytes[..]),
        Err(ModelError::QuantizedUnsupported)
    ));
}

#[test]
fn non_supervised_model_is_rejected() {
    let builder = FixtureBuilder::new(4, 16).words(&["aa"]).labels(&["x"]);
    let mut bytes = builder.to_bytes();
    // args field 8 (the model kind) starts at byte 8 + 7*4.
    let model_kind_at = 8 + 7 * 4;
    bytes[model_kind_at] = 1; // cbow
    assert!(matches!(
        read_model(&mut &bytes[..]),
        Err(ModelError::NonSupervisedModel)
    ));
}

#[test]
fn truncated_matrix_is_reported() {
    let builder = FixtureBuilder::new(4, 16).words(&["aa"]).labels(&["x"]);
    let bytes = builder.to_bytes();
    let cut = &bytes[..bytes.len() - 7];
    assert!(matches!(
        read_model(&mut &cut[..]),
        Err(ModelError::TruncatedFile(_))
    ));
}

#[test]
fn loading_does_not_modify_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    let bytes = FixtureBuilder::new(4, 8).words(&["w"]).labels(&["l"]).to_bytes();
    std::fs::write(&path, &bytes).unwrap();
    let a = load_model(&path).unwrap();
    let b = load_model(&path).unwrap();
    assert_eq!(a, b);
    assert_eq!(std::fs::read(&path).unwrap(), bytes);
}

prop_compose! {
    fn arb_fixture()(
        dim in 1usize..6,
        bucket in 0usize..48,
        ngram in prop::option::of((1usize..3, 1usize..5)),
        word_ngrams in 1usize..4,
        nwords in 1usize..6,
        nlabels in 1usize..4,
        seed in any::<u64>(),
    ) -> FixtureBuilder {
        let (minn, extra) = ngram.unwrap_or((0, 0));
        let maxn = if ngram.is_some() { minn + extra } else { 0 };
        // n-gram features require a non-empty bucket.
        let bucket = if maxn > 0 || word_ngrams > 1 { bucket.max(1) } else { bucket };
        let words: Vec<String> = (0..nwords).map(|i| format!("word{i}")).collect();
        let labels: Vec<String> = (0..nlabels).map(|i| format!("l{i}")).collect();
        FixtureBuilder::new(dim, bucket)
            .words(&words.iter().map(String::as_str).collect::<Vec<_>>())
            .labels(&labels.iter().map(String::as_str).collect::<Vec<_>>())
            .char_ngrams(if maxn > 0 { minn } else { 0 }, maxn)
            .word_ngrams(word_ngrams)
            .seed(seed)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn write_then_load_reproduces_every_field(builder in arb_fixture()) {
        let expected = builder.build().unwrap();
        let bytes = builder.to_bytes();
        let loaded = read_model(&mut &bytes[..]).unwrap();
        prop_assert_eq!(loaded, expected);
    }

    #[test]
    fn feature_ids_index_the_input_matrix(builder in arb_fixture(), text in "[a-zğş0-9 ]{1,40}") {
        let model = builder.build().unwrap();
        if let Ok(f) = featurize(&text, &model) {
            for w in &f.words {
                for &id in &w.feature_ids {
                    prop_assert!(id < model.input().rows());
                }
            }
            for &id in &f.extra_ids {
                prop_assert!(id < model.input().rows());
            }
        }
    }
}
