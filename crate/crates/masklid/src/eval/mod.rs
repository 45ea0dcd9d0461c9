//! Evaluation against token-labeled code-switching datasets: ingestion,
//! the byte-length/cleaning preprocessing, the thresholded baseline
//! predictor, and exact/partial-match scoring per gold label set.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::inference::{featurize, predict, InferenceError, LabelSubset};
use crate::model::{canonical_label, tokenize, ClassifierModel};

mod ingest;
mod synth;

pub use ingest::{ingest_token_labeled, parse_jsonl, parse_token_per_line, DatasetFormat, LabelMap};
pub use synth::synthesize_cs;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("line {line}: {msg}")]
    MalformedRecord { line: usize, msg: String },
    #[error("prediction/gold length mismatch: {predictions} vs {gold}")]
    LengthMismatch { predictions: usize, gold: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One evaluation sentence with its gold label set (one label =
/// monolingual, two or more = code-switched).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GoldSentence {
    pub text: String,
    pub gold: BTreeSet<String>,
    pub id: String,
}

impl GoldSentence {
    pub fn is_code_switched(&self) -> bool {
        self.gold.len() >= 2
    }
}

/// Single-pass predictor configuration: keep labels above the probability
/// threshold, at most `max_labels` of them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub threshold: f32,
    pub max_labels: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            threshold: 0.3,
            max_labels: 2,
        }
    }
}

/// Labels whose probability strictly exceeds the threshold, truncated to
/// the top `max_labels` by probability. May be empty, which never matches.
pub fn baseline_predict(
    sentence: &str,
    model: &ClassifierModel,
    subset: &LabelSubset,
    cfg: &BaselineConfig,
) -> Result<BTreeSet<String>, InferenceError> {
    let features = featurize(sentence, model)?;
    let prediction = match predict(&features, model, subset) {
        Ok(p) => p,
        Err(InferenceError::EmptyFeatureSet) => return Ok(BTreeSet::new()),
        Err(e) => return Err(e),
    };
    Ok(prediction
        .ranked()
        .iter()
        .filter(|(_, p)| *p > cfg.threshold)
        .take(cfg.max_labels)
        .map(|(l, _)| canonical_label(model.dictionary().label(*l)).to_string())
        .collect())
}

/// One row of the evaluation report, keyed by a gold label set.
/// `false_positives` is populated only for code-switched rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvalRow {
    pub gold: BTreeSet<String>,
    pub sentences: usize,
    pub exact: usize,
    pub partial: usize,
    pub false_positives: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn row(&self, gold: &BTreeSet<String>) -> Option<&EvalRow> {
        self.rows.iter().find(|r| &r.gold == gold)
    }

    /// Tab-separated rows: label set, #S, #EM, #PM, #FP ("-" for
    /// monolingual rows). Code-switched rows first.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("labels\tsentences\texact\tpartial\tfalse_positives\n");
        for row in &self.rows {
            let labels = row.gold.iter().cloned().collect::<Vec<_>>().join("+");
            let fp = row
                .false_positives
                .map_or_else(|| "-".to_string(), |v| v.to_string());
            out.push_str(&format!(
                "{labels}\t{}\t{}\t{}\t{fp}\n",
                row.sentences, row.exact, row.partial
            ));
        }
        out
    }
}

/// Scores aligned predictions against gold sentences.
///
/// Exact match: prediction set equals the gold set. Partial match: for a
/// single gold label, the label appears in the prediction; for a
/// code-switched gold set, any gold member appears (every exact match is
/// also partial). A false positive for code-switched set X is a sentence
/// with gold != X predicted exactly as X.
pub fn score(
    predictions: &[BTreeSet<String>],
    gold: &[GoldSentence],
) -> Result<EvalReport, EvalError> {
    if predictions.len() != gold.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            gold: gold.len(),
        });
    }
    use std::collections::BTreeMap;
    let mut rows: BTreeMap<BTreeSet<String>, (usize, usize, usize, usize)> = BTreeMap::new();
    for (pred, sent) in predictions.iter().zip(gold) {
        let entry = rows.entry(sent.gold.clone()).or_default();
        entry.0 += 1;
        let exact = pred == &sent.gold;
        let partial = sent.gold.iter().any(|l| pred.contains(l));
        if exact {
            entry.1 += 1;
        }
        if partial {
            entry.2 += 1;
        }
        if pred.len() >= 2 && pred != &sent.gold {
            rows.entry(pred.clone()).or_default().3 += 1;
        }
    }
    let mut rows: Vec<EvalRow> = rows
        .into_iter()
        .map(|(gold, (s, em, pm, fp))| EvalRow {
            false_positives: (gold.len() >= 2).then_some(fp),
            gold,
            sentences: s,
            exact: em,
            partial: pm,
        })
        .collect();
    // Code-switched rows first, then alphabetical.
    rows.sort_by(|a, b| {
        let a_cs = a.gold.len() >= 2;
        let b_cs = b.gold.len() >= 2;
        b_cs.cmp(&a_cs).then_with(|| a.gold.cmp(&b.gold))
    });
    Ok(EvalReport { rows })
}

/// Byte-length cutoffs: monolingual sentences at or under 20 bytes and
/// code-switched sentences at or under 40 bytes are dropped.
pub const MONOLINGUAL_MIN_BYTES: usize = 20;
pub const CS_MIN_BYTES: usize = 40;

/// Cleans every sentence (user tags, emoji) and applies the byte-length
/// cutoffs. Idempotent.
pub fn preprocess(sentences: Vec<GoldSentence>) -> Vec<GoldSentence> {
    sentences
        .into_iter()
        .filter_map(|s| {
            let text = clean_text(&s.text);
            let min = if s.gold.len() >= 2 {
                CS_MIN_BYTES
            } else {
                MONOLINGUAL_MIN_BYTES
            };
            (text.len() > min).then_some(GoldSentence { text, ..s })
        })
        .collect()
}

/// Removes `@`-prefixed user tags and emoji (pictograph blocks, variation
/// selectors, zero-width joiner, combining keycap), then re-joins the
/// surviving tokens with single spaces.
pub fn clean_text(text: &str) -> String {
    let tokens: Vec<String> = tokenize(text)
        .into_iter()
        .filter(|t| !t.starts_with('@'))
        .map(|t| t.chars().filter(|&c| !is_emoji_component(c)).collect::<String>())
        .filter(|t| !t.is_empty())
        .collect();
    tokens.join(" ")
}

fn is_emoji_component(c: char) -> bool {
    matches!(u32::from(c),
        0x1F000..=0x1FFFF   // pictographs, emoticons, transport, flags, extended
        | 0x2600..=0x27BF   // miscellaneous symbols, dingbats
        | 0x2B00..=0x2BFF   // arrows-and-symbols block used by emoji
        | 0xFE00..=0xFE0F   // variation selectors
        | 0x200D            // zero-width joiner
        | 0x20E3            // combining enclosing keycap
    )
}
