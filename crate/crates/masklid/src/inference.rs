//! Sentence-level inference: feature extraction, softmax prediction over a
//! label subset, and the per-word logit matrix that drives masking.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::model::{
    hash_token, subword_ids, tokenize, word_ngram_ids, ClassifierModel, EOS,
};

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("input is empty")]
    EmptyInput,
    #[error("no features could be extracted from the input")]
    EmptyFeatureSet,
    #[error("none of the requested labels exist in the model")]
    NoLabelsMatched,
    #[error("cannot read label file: {0}")]
    Io(#[from] std::io::Error),
}

/// The active set of label indices, sorted ascending and deduplicated.
/// Restricting to a subset removes the other languages from both the
/// softmax normalizer and the logit matrix rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSubset {
    indices: Vec<usize>,
}

impl LabelSubset {
    /// Every label the model supports.
    pub fn full(model: &ClassifierModel) -> Self {
        LabelSubset {
            indices: (0..model.dictionary().nlabels()).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, label: usize) -> bool {
        self.indices.binary_search(&label).is_ok()
    }
}

/// Outcome of restricting a model to named labels: the subset plus the
/// names that matched nothing (kept for diagnostics).
#[derive(Debug, Clone)]
pub struct Restriction {
    pub subset: LabelSubset,
    pub unmatched: Vec<String>,
}

/// Resolves label names (bare or `__label__`-prefixed) against the model.
/// Errors only when no name matches at all.
pub fn restrict_labels<S: AsRef<str>>(
    model: &ClassifierModel,
    names: &[S],
) -> Result<Restriction, InferenceError> {
    let dict = model.dictionary();
    let mut indices = Vec::new();
    let mut unmatched = Vec::new();
    for name in names {
        match dict.label_index(name.as_ref()) {
            Some(ix) => indices.push(ix),
            None => unmatched.push(name.as_ref().to_string()),
        }
    }
    indices.sort_unstable();
    indices.dedup();
    if indices.is_empty() {
        return Err(InferenceError::NoLabelsMatched);
    }
    Ok(Restriction {
        subset: LabelSubset { indices },
        unmatched,
    })
}

/// Parses a label-subset file: one label per line, `#` comments, blank
/// lines ignored.
pub fn load_label_file(path: impl AsRef<Path>) -> Result<Vec<String>, InferenceError> {
    let text = fs::read_to_string(path)?;
    Ok(parse_label_lines(&text))
}

pub fn parse_label_lines(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

/// One surface token and the input-matrix rows it contributes.
#[derive(Debug, Clone, PartialEq)]
pub struct WordFeatures {
    pub surface: String,
    pub feature_ids: Vec<usize>,
}

/// Features of one sentence: the ordered words with their own feature ids,
/// plus sentence-level extras (the end-of-sentence marker and word n-grams
/// of order >= 2, which span words and belong to no single one).
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceFeatures {
    pub words: Vec<WordFeatures>,
    pub extra_ids: Vec<usize>,
}

impl SentenceFeatures {
    /// Total feature count T.
    pub fn total_features(&self) -> usize {
        self.words.iter().map(|w| w.feature_ids.len()).sum::<usize>() + self.extra_ids.len()
    }
}

/// Tokenizes a sentence and gathers feature ids the way the reference
/// prediction path does: per-word ids in textual order, then the
/// end-of-sentence marker, then word n-grams over the token hashes.
///
/// Tokens that are dictionary labels (or look like one) contribute no
/// features; a literal `</s>` token ends featurization early.
pub fn featurize(
    sentence: &str,
    model: &ClassifierModel,
) -> Result<SentenceFeatures, InferenceError> {
    let tokens = tokenize(sentence);
    if tokens.is_empty() {
        return Err(InferenceError::EmptyInput);
    }
    let hp = model.hyperparams();
    let dict = model.dictionary();

    let mut words = Vec::with_capacity(tokens.len());
    let mut hashes = Vec::with_capacity(tokens.len() + 1);
    let mut saw_eos = false;
    for tok in tokens {
        if crate::model::is_label_token(tok, dict) {
            words.push(WordFeatures {
                surface: tok.to_string(),
                feature_ids: Vec::new(),
            });
            continue;
        }
        words.push(WordFeatures {
            surface: tok.to_string(),
            feature_ids: subword_ids(tok, hp, dict),
        });
        hashes.push(hash_token(tok.as_bytes()));
        if tok == EOS {
            saw_eos = true;
            break;
        }
    }

    let mut extra_ids = Vec::new();
    if !saw_eos {
        extra_ids.extend(subword_ids(EOS, hp, dict));
        hashes.push(hash_token(EOS.as_bytes()));
    }
    extra_ids.extend(word_ngram_ids(&hashes, hp.word_ngrams, hp, dict));

    Ok(SentenceFeatures { words, extra_ids })
}

/// Ranked labels with probabilities over the active subset.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    ranked: Vec<(usize, f32)>,
}

impl Prediction {
    /// Highest-probability label (absolute label index) and its probability.
    pub fn top(&self) -> (usize, f32) {
        self.ranked[0]
    }

    /// All (label, probability) pairs, descending; ties broken by lower
    /// label index.
    pub fn ranked(&self) -> &[(usize, f32)] {
        &self.ranked
    }

    pub fn probability_of(&self, label: usize) -> Option<f32> {
        self.ranked.iter().find(|(l, _)| *l == label).map(|(_, p)| *p)
    }

    /// 1-based rank of a label, when present in the subset.
    pub fn rank_of(&self, label: usize) -> Option<usize> {
        self.ranked.iter().position(|(l, _)| *l == label).map(|p| p + 1)
    }
}

/// Softmax prediction over the subset: the hidden vector averages *all*
/// features (per-word and sentence-level); languages outside the subset
/// are excluded from the normalizer.
pub fn predict(
    features: &SentenceFeatures,
    model: &ClassifierModel,
    subset: &LabelSubset,
) -> Result<Prediction, InferenceError> {
    if subset.is_empty() {
        return Err(InferenceError::NoLabelsMatched);
    }
    let t = features.total_features();
    if t == 0 {
        return Err(InferenceError::EmptyFeatureSet);
    }
    let mut hidden = vec![0.0f32; model.hyperparams().dim];
    for word in &features.words {
        for &id in &word.feature_ids {
            model.input().add_row_to(&mut hidden, id);
        }
    }
    for &id in &features.extra_ids {
        model.input().add_row_to(&mut hidden, id);
    }
    let scale = (1.0f64 / t as f64) as f32;
    for v in &mut hidden {
        *v *= scale;
    }
    Ok(softmax_over_subset(model, subset, &hidden))
}

/// Softmax with max-logit subtraction; probabilities over the subset sum
/// to 1 within 1e-6.
fn softmax_over_subset(
    model: &ClassifierModel,
    subset: &LabelSubset,
    hidden: &[f32],
) -> Prediction {
    let logits: Vec<f32> = subset
        .indices()
        .iter()
        .map(|&c| model.output().dot_row(c, hidden))
        .collect();
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let exps: Vec<f32> = logits.iter().map(|&l| ((l - max) as f64).exp() as f32).collect();
    let z: f32 = exps.iter().sum();
    let mut ranked: Vec<(usize, f32)> = subset
        .indices()
        .iter()
        .zip(&exps)
        .map(|(&c, &e)| (c, e / z))
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    Prediction { ranked }
}

/// One column of the word-logit matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct WordColumn {
    pub surface: String,
    pub byte_len: usize,
    /// Sum (not average) of the word's own feature embeddings.
    pub embedding: Vec<f32>,
}

/// The per-language, per-word logit matrix: one row per subset label, one
/// column per word of the original sentence. Entry (c, t) is the dot
/// product of label c's weight vector with word t's summed embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct WordLogitMatrix {
    labels: Vec<usize>,
    columns: Vec<WordColumn>,
    values: Vec<f32>,
}

impl WordLogitMatrix {
    /// Absolute label indices of the rows, ascending.
    pub fn label_rows(&self) -> &[usize] {
        &self.labels
    }

    pub fn columns(&self) -> &[WordColumn] {
        &self.columns
    }

    pub fn n_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn n_words(&self) -> usize {
        self.columns.len()
    }

    pub fn value(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.columns.len() + col]
    }

    pub fn row_of_label(&self, label: usize) -> Option<usize> {
        self.labels.binary_search(&label).ok()
    }

    /// Number of rows ranked strictly ahead of `row` in `col` under the
    /// deterministic order: value descending, lower row index first on
    /// ties. Rank 0 is the column maximum.
    pub fn column_rank(&self, row: usize, col: usize) -> usize {
        let v = self.value(row, col);
        (0..self.labels.len())
            .filter(|&r| {
                let u = self.value(r, col);
                u > v || (u == v && r < row)
            })
            .count()
    }
}

/// Builds the word-logit matrix for a featurized sentence, restricted to
/// the subset rows. Word n-grams of order >= 2 span several words and are
/// attributed to no column; a word with no features gets a zero column.
pub fn word_logit_matrix(
    features: &SentenceFeatures,
    model: &ClassifierModel,
    subset: &LabelSubset,
) -> Result<WordLogitMatrix, InferenceError> {
    if features.words.is_empty() {
        return Err(InferenceError::EmptyInput);
    }
    if subset.is_empty() {
        return Err(InferenceError::NoLabelsMatched);
    }
    let dim = model.hyperparams().dim;
    let columns: Vec<WordColumn> = features
        .words
        .iter()
        .map(|w| {
            let mut embedding = vec![0.0f32; dim];
            for &id in &w.feature_ids {
                model.input().add_row_to(&mut embedding, id);
            }
            WordColumn {
                surface: w.surface.clone(),
                byte_len: w.surface.len(),
                embedding,
            }
        })
        .collect();
    let mut values = Vec::with_capacity(subset.len() * columns.len());
    for &c in subset.indices() {
        for col in &columns {
            values.push(model.output().dot_row(c, &col.embedding));
        }
    }
    Ok(WordLogitMatrix {
        labels: subset.indices().to_vec(),
        columns,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixture::FixtureBuilder;

    fn unit_model() -> ClassifierModel {
        // One word "w" with embedding [1,0,0,0]; label 0 weights [1,0,0,0],
        // label 1 all zero. No EOS entry, so a one-word sentence has T=1.
        let mut input = vec![0.0f32; (1 + 8) * 4];
        input[0] = 1.0;
        let mut output = vec![0.0f32; 2 * 4];
        output[0] = 1.0;
        FixtureBuilder::new(4, 8)
            .word("w")
            .labels(&["one", "two"])
            .input_matrix(input)
            .output_matrix(output)
            .build()
            .unwrap()
    }

    #[test]
    fn featurize_rejects_empty_input() {
        let model = unit_model();
        assert!(matches!(
            featurize("   ", &model),
            Err(InferenceError::EmptyInput)
        ));
    }

    #[test]
    fn single_word_no_ngrams_has_one_feature() {
        let model = unit_model();
        let f = featurize("w", &model).unwrap();
        assert_eq!(f.words.len(), 1);
        assert_eq!(f.total_features(), 1);
        assert!(f.extra_ids.is_empty());
    }

    #[test]
    fn analytic_softmax_two_labels() {
        // b_0 . x = 1.0, b_1 . x = 0.0 => P(0) = e / (e + 1).
        let model = unit_model();
        let f = featurize("w", &model).unwrap();
        let p = predict(&f, &model, &LabelSubset::full(&model)).unwrap();
        let (top, prob) = p.top();
        assert_eq!(top, 0);
        let expected = std::f32::consts::E / (std::f32::consts::E + 1.0);
        assert!((prob - expected).abs() < 1e-6, "{prob} vs {expected}");
        assert!((prob - 0.7311).abs() < 1e-4);
    }

    #[test]
    fn zero_output_rows_give_uniform_probabilities() {
        let model = FixtureBuilder::new(4, 8)
            .word("w")
            .labels(&["a", "b", "c"])
            .output_matrix(vec![0.0; 12])
            .build()
            .unwrap();
        let f = featurize("w", &model).unwrap();
        let p = predict(&f, &model, &LabelSubset::full(&model)).unwrap();
        for (_, prob) in p.ranked() {
            assert!((prob - 1.0 / 3.0).abs() < 1e-6);
        }
    }

    #[test]
    fn restriction_keeps_logits_changes_normalizer() {
        let model = FixtureBuilder::new(4, 8)
            .words(&["w", "v"])
            .labels(&["a", "b", "c"])
            .seed(3)
            .build()
            .unwrap();
        let f = featurize("w v", &model).unwrap();
        let full = predict(&f, &model, &LabelSubset::full(&model)).unwrap();
        let r = restrict_labels(&model, &["a", "c"]).unwrap();
        let restricted = predict(&f, &model, &r.subset).unwrap();
        // Within the subset the relative order (ratio of probabilities)
        // is preserved; only the normalizer changed.
        let full_ratio = full.probability_of(0).unwrap() / full.probability_of(2).unwrap();
        let res_ratio =
            restricted.probability_of(0).unwrap() / restricted.probability_of(2).unwrap();
        assert!((full_ratio - res_ratio).abs() < 1e-4);
        assert!(restricted.probability_of(1).is_none());
    }

    #[test]
    fn restrict_full_list_is_identity() {
        let model = unit_model();
        let names: Vec<String> = model.dictionary().labels().map(str::to_string).collect();
        let r = restrict_labels(&model, &names).unwrap();
        assert_eq!(r.subset.len(), model.dictionary().nlabels());
        assert!(r.unmatched.is_empty());
    }

    #[test]
    fn restrict_unknown_labels_errors() {
        let model = unit_model();
        assert!(matches!(
            restrict_labels(&model, &["xxx_Xxxx"]),
            Err(InferenceError::NoLabelsMatched)
        ));
        let r = restrict_labels(&model, &["one", "xxx_Xxxx"]).unwrap();
        assert_eq!(r.unmatched, vec!["xxx_Xxxx".to_string()]);
    }

    #[test]
    fn label_file_parsing_skips_comments() {
        let labels = parse_label_lines("# header\n\ntur_Latn\neng_Latn # inline\n");
        assert_eq!(labels, vec!["tur_Latn", "eng_Latn"]);
    }

    #[test]
    fn oov_word_gets_zero_column() {
        let model = unit_model(); // minn = maxn = 0
        let f = featurize("w zzz", &model).unwrap();
        let v = word_logit_matrix(&f, &model, &LabelSubset::full(&model)).unwrap();
        assert_eq!(v.n_words(), 2);
        for r in 0..v.n_labels() {
            assert_eq!(v.value(r, 1), 0.0);
        }
    }

    #[test]
    fn column_rank_orders_by_value_then_index() {
        let model = FixtureBuilder::new(4, 8)
            .word("w")
            .labels(&["a", "b", "c"])
            .output_matrix(vec![
                1.0, 0.0, 0.0, 0.0, // same logit as row 2
                2.0, 0.0, 0.0, 0.0,
                1.0, 0.0, 0.0, 0.0,
            ])
            .input_matrix({
                let mut m = vec![0.0; (1 + 8) * 4];
                m[0] = 1.0;
                m
            })
            .build()
            .unwrap();
        let f = featurize("w", &model).unwrap();
        let v = word_logit_matrix(&f, &model, &LabelSubset::full(&model)).unwrap();
        assert_eq!(v.column_rank(1, 0), 0);
        assert_eq!(v.column_rank(0, 0), 1); // ties break toward lower index
        assert_eq!(v.column_rank(2, 0), 2);
    }

    #[test]
    fn label_like_tokens_contribute_nothing() {
        let model = unit_model();
        let f = featurize("w __label__one", &model).unwrap();
        assert_eq!(f.words.len(), 2);
        assert!(f.words[1].feature_ids.is_empty());
        assert_eq!(f.total_features(), 1);
    }
}
