//! The iterative masking procedure. Each round predicts the dominant
//! language of the residual sentence, assigns the words where that
//! language ranks in the top-beta of their logit column, masks the words
//! where it ranks in the top-alpha, and repeats on what is left. The logit
//! matrix is computed once, from the original sentence.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::{
    featurize, predict, word_logit_matrix, InferenceError, LabelSubset, SentenceFeatures,
    WordLogitMatrix,
};
use crate::model::ClassifierModel;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    InvalidValue(String),
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum MaskError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

/// Tuning knobs of the masking procedure. The defaults are the tuned
/// values: alpha 3, beta 15, tau 20 bytes, lambda 2 rounds, feature-set
/// confidence 0.9, one beta retry at factor 2, no round-one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskLIDConfig {
    /// Strong-association rank cutoff: a word whose column ranks the
    /// candidate within the top alpha gets masked.
    pub alpha: usize,
    /// Weak-association rank cutoff: within the top beta the word is
    /// assigned to the candidate. Must exceed alpha.
    pub beta: usize,
    /// Minimum byte length for both the residual and an accepted feature
    /// set; below it the classifier is not trusted.
    pub tau: usize,
    /// Maximum number of rounds, bounding how many languages can be found.
    pub lambda: usize,
    /// Minimum probability the candidate must reach on its own feature
    /// set for the assignment to be emitted.
    pub feature_set_confidence: f32,
    /// Multiplier for the single beta retry when the assigned set is
    /// shorter than tau. The retry never affects masking.
    pub beta_retry_factor: usize,
    /// Optional confidence floor for the round's dominant-language
    /// prediction; `None` (the default) disables the check.
    pub step1_confidence: Option<f32>,
}

impl Default for MaskLIDConfig {
    fn default() -> Self {
        MaskLIDConfig {
            alpha: 3,
            beta: 15,
            tau: 20,
            lambda: 2,
            feature_set_confidence: 0.9,
            beta_retry_factor: 2,
            step1_confidence: None,
        }
    }
}

impl MaskLIDConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.alpha < 1 {
            return Err(ConfigError::InvalidValue("alpha must be >= 1".into()));
        }
        if self.beta <= self.alpha {
            return Err(ConfigError::InvalidValue(format!(
                "beta ({}) must be greater than alpha ({})",
                self.beta, self.alpha
            )));
        }
        if self.lambda < 1 {
            return Err(ConfigError::InvalidValue("lambda must be >= 1".into()));
        }
        if !(self.feature_set_confidence > 0.0 && self.feature_set_confidence <= 1.0) {
            return Err(ConfigError::InvalidValue(
                "feature_set_confidence must be in (0, 1]".into(),
            ));
        }
        if self.beta_retry_factor < 1 {
            return Err(ConfigError::InvalidValue(
                "beta_retry_factor must be >= 1".into(),
            ));
        }
        if let Some(c) = self.step1_confidence {
            if !(c > 0.0 && c <= 1.0) {
                return Err(ConfigError::InvalidValue(
                    "step1_confidence must be in (0, 1]".into(),
                ));
            }
        }
        Ok(())
    }

    /// Reads a `key = value` config file over the defaults. Keys: alpha,
    /// beta, tau, lambda, feature_set_confidence, beta_retry_factor,
    /// step1_confidence. `#` starts a comment.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)?;
        let mut cfg = MaskLIDConfig::default();
        cfg.apply_str(&text)?;
        Ok(cfg)
    }

    pub fn apply_str(&mut self, text: &str) -> Result<(), ConfigError> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Parse {
                line: no + 1,
                msg: "expected key = value".into(),
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |msg: String| ConfigError::Parse { line: no + 1, msg };
            match key {
                "alpha" => self.alpha = parse_num(value).map_err(bad)?,
                "beta" => self.beta = parse_num(value).map_err(bad)?,
                "tau" => self.tau = parse_num(value).map_err(bad)?,
                "lambda" => self.lambda = parse_num(value).map_err(bad)?,
                "feature_set_confidence" => {
                    self.feature_set_confidence = parse_num(value).map_err(bad)?
                }
                "beta_retry_factor" => self.beta_retry_factor = parse_num(value).map_err(bad)?,
                "step1_confidence" => {
                    self.step1_confidence = Some(parse_num(value).map_err(bad)?)
                }
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        Ok(())
    }
}

fn parse_num<T: std::str::FromStr>(value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("cannot parse {value:?}"))
}

/// Why the procedure stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    LambdaReached,
    ResidualTooShort,
    RepeatLanguage,
    LowConfidenceFeatureSet,
    EmptyResidual,
}

/// One emitted language with the words that cued it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LanguageAssignment {
    /// Absolute label index into the model's label list.
    pub label: usize,
    /// Indices into the original word list; unmasked when assigned.
    pub words: Vec<usize>,
    /// Byte length of the assigned words joined by single spaces.
    pub byte_len: usize,
    /// Probability the model gives this label on the assigned words alone.
    pub probability: f32,
    /// 1-based round in which the assignment was made.
    pub iteration: usize,
}

/// The set prediction for one sentence: accepted assignments in round
/// order, plus why the loop stopped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SentencePrediction {
    pub assignments: Vec<LanguageAssignment>,
    pub termination: TerminationReason,
}

impl SentencePrediction {
    pub fn labels(&self) -> impl Iterator<Item = usize> + '_ {
        self.assignments.iter().map(|a| a.label)
    }

    /// True when at least two languages were found.
    pub fn is_code_switched(&self) -> bool {
        self.assignments.len() >= 2
    }
}

/// Mask bookkeeping over the original words. Masked flags only ever
/// accumulate; the residual is the unmasked words joined by single spaces.
#[derive(Debug, Clone)]
pub struct MaskState {
    surfaces: Vec<String>,
    masked: Vec<bool>,
    iteration: usize,
}

impl MaskState {
    pub fn new(features: &SentenceFeatures) -> Self {
        MaskState {
            surfaces: features.words.iter().map(|w| w.surface.clone()).collect(),
            masked: vec![false; features.words.len()],
            iteration: 0,
        }
    }

    pub fn masked(&self) -> &[bool] {
        &self.masked
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn mask(&mut self, index: usize) {
        self.masked[index] = true;
    }

    pub fn unmasked_indices(&self) -> Vec<usize> {
        (0..self.surfaces.len()).filter(|&i| !self.masked[i]).collect()
    }

    pub fn residual_text(&self) -> String {
        let parts: Vec<&str> = self
            .surfaces
            .iter()
            .zip(&self.masked)
            .filter(|(_, &m)| !m)
            .map(|(s, _)| s.as_str())
            .collect();
        parts.join(" ")
    }

    fn joined_byte_len(&self, indices: &[usize]) -> usize {
        if indices.is_empty() {
            return 0;
        }
        indices.iter().map(|&i| self.surfaces[i].len()).sum::<usize>() + indices.len() - 1
    }
}

/// Byte length of the residual: unmasked word bytes plus the single
/// spaces between them; 0 once everything is masked.
pub fn residual_byte_len(state: &MaskState) -> usize {
    state.joined_byte_len(&state.unmasked_indices())
}

/// True when `label`'s value sits within the `k` largest entries of the
/// word's column, under the deterministic tie-break (value descending,
/// lower label index first).
pub fn top_rank_member(
    matrix: &WordLogitMatrix,
    label: usize,
    word: usize,
    k: usize,
) -> bool {
    debug_assert!(k >= 1);
    match matrix.row_of_label(label) {
        Some(row) => matrix.column_rank(row, word) < k,
        None => false,
    }
}

/// Final acceptance check for an assigned feature set: non-empty, at
/// least tau bytes when joined, and the model must give the candidate at
/// least `feature_set_confidence` on those words alone. Returns the
/// candidate's probability either way (0.0 when it cannot be computed).
pub fn validate_feature_set(
    words: &[&str],
    candidate: usize,
    model: &ClassifierModel,
    subset: &LabelSubset,
    cfg: &MaskLIDConfig,
) -> (bool, f32) {
    if words.is_empty() {
        return (false, 0.0);
    }
    let text = words.join(" ");
    let probability = match featurize(&text, model).and_then(|f| predict(&f, model, subset)) {
        Ok(p) => p.probability_of(candidate).unwrap_or(0.0),
        Err(_) => return (false, 0.0),
    };
    let accepted = text.len() >= cfg.tau && probability >= cfg.feature_set_confidence;
    (accepted, probability)
}

/// Per-round diagnostics, for tests and verbose output.
#[derive(Debug, Clone, Serialize)]
pub struct RoundTrace {
    pub iteration: usize,
    pub residual_before: usize,
    pub dominant: usize,
    pub dominant_probability: f32,
    pub accepted: bool,
    pub newly_masked: Vec<usize>,
    pub masked_after: Vec<bool>,
    pub residual_after: usize,
}

/// Runs the masking procedure on one sentence. Deterministic: identical
/// inputs produce identical outputs.
pub fn masklid(
    sentence: &str,
    model: &ClassifierModel,
    subset: &LabelSubset,
    cfg: &MaskLIDConfig,
) -> Result<SentencePrediction, MaskError> {
    masklid_traced(sentence, model, subset, cfg).map(|(p, _)| p)
}

/// Like [`masklid`], also returning the per-round trace.
pub fn masklid_traced(
    sentence: &str,
    model: &ClassifierModel,
    subset: &LabelSubset,
    cfg: &MaskLIDConfig,
) -> Result<(SentencePrediction, Vec<RoundTrace>), MaskError> {
    cfg.validate()?;
    let features = featurize(sentence, model)?;
    // The logit matrix is computed once, from the original sentence, and
    // never recomputed; masking only changes which columns get processed.
    let matrix = word_logit_matrix(&features, model, subset)?;
    let mut state = MaskState::new(&features);
    let mut assignments: Vec<LanguageAssignment> = Vec::new();
    let mut trace = Vec::new();

    let termination = loop {
        state.iteration += 1;
        let residual_before = residual_byte_len(&state);

        // Round step 1: classify the residual as a plain sentence (word
        // n-grams recomputed over the surviving adjacency).
        let residual = state.residual_text();
        if residual.is_empty() {
            break TerminationReason::EmptyResidual;
        }
        let rfeatures = featurize(&residual, model)?;
        let prediction = match predict(&rfeatures, model, subset) {
            Ok(p) => p,
            // A residual with words but no extractable features cannot be
            // classified; treat it like an exhausted residual.
            Err(InferenceError::EmptyFeatureSet) => break TerminationReason::EmptyResidual,
            Err(e) => return Err(e.into()),
        };
        let (dominant, dominant_probability) = prediction.top();
        if let Some(threshold) = cfg.step1_confidence {
            if dominant_probability < threshold {
                break TerminationReason::LowConfidenceFeatureSet;
            }
        }
        if assignments.iter().any(|a| a.label == dominant) {
            break TerminationReason::RepeatLanguage;
        }

        // Round step 2: gather and mask from the original matrix.
        let unmasked = state.unmasked_indices();
        let mut assigned: Vec<usize> = unmasked
            .iter()
            .copied()
            .filter(|&t| top_rank_member(&matrix, dominant, t, cfg.beta))
            .collect();
        let to_mask: Vec<usize> = unmasked
            .iter()
            .copied()
            .filter(|&t| top_rank_member(&matrix, dominant, t, cfg.alpha))
            .collect();

        // One beta retry when the gathered set is too short to trust;
        // the inflated beta plays no role in masking.
        if state.joined_byte_len(&assigned) < cfg.tau {
            let widened = cfg.beta * cfg.beta_retry_factor;
            assigned = unmasked
                .iter()
                .copied()
                .filter(|&t| top_rank_member(&matrix, dominant, t, widened))
                .collect();
        }

        let surfaces: Vec<&str> = assigned
            .iter()
            .map(|&t| matrix.columns()[t].surface.as_str())
            .collect();
        let (accepted, probability) =
            validate_feature_set(&surfaces, dominant, model, subset, cfg);
        if accepted {
            assignments.push(LanguageAssignment {
                label: dominant,
                byte_len: state.joined_byte_len(&assigned),
                words: assigned,
                probability,
                iteration: state.iteration,
            });
        }

        for &t in &to_mask {
            state.mask(t);
        }
        let residual_after = residual_byte_len(&state);
        trace.push(RoundTrace {
            iteration: state.iteration,
            residual_before,
            dominant,
            dominant_probability,
            accepted,
            newly_masked: to_mask.clone(),
            masked_after: state.masked().to_vec(),
            residual_after,
        });

        // Round step 3: residual length gate.
        if residual_after <= cfg.tau {
            break if cfg.tau == 0 {
                TerminationReason::EmptyResidual
            } else {
                TerminationReason::ResidualTooShort
            };
        }
        // Round step 4: round budget.
        if state.iteration >= cfg.lambda {
            break TerminationReason::LambdaReached;
        }
        // A round that masked nothing would replay the same residual
        // forever; the accepted case would hit the repeat check next
        // round anyway, the rejected case has no other exit.
        if to_mask.is_empty() {
            break if accepted {
                TerminationReason::RepeatLanguage
            } else {
                TerminationReason::LowConfidenceFeatureSet
            };
        }
    };

    Ok((
        SentencePrediction {
            assignments,
            termination,
        },
        trace,
    ))
}
