//! The in-memory representation of a supervised fastText-format model:
//! hyperparameters, dictionary, and the dense input/output matrices.

use std::collections::HashMap;

use thiserror::Error;

mod features;
pub mod fixture;
mod load;

pub(crate) use features::is_label_token;
pub use features::{hash_token, subword_ids, tokenize, word_ngram_ids};
pub use load::{load_model, read_model, FORMAT_VERSION, MAGIC};

/// End-of-sentence marker. The reference tokenizer appends it to every
/// line, so it participates in sentence-level prediction.
pub const EOS: &str = "</s>";

/// Prefix carried by label entries in supervised dictionaries.
pub const LABEL_PREFIX: &str = "__label__";

/// Strips the `__label__` prefix if present.
pub fn canonical_label(name: &str) -> &str {
    name.strip_prefix(LABEL_PREFIX).unwrap_or(name)
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("bad magic number 0x{0:08x}")]
    BadMagic(u32),
    #[error("unsupported model format version {0} (expected {FORMAT_VERSION})")]
    UnsupportedVersion(i32),
    #[error("quantized models are not supported")]
    QuantizedUnsupported,
    #[error("file ends before the {0} section is complete")]
    TruncatedFile(&'static str),
    #[error("model kind is not supervised")]
    NonSupervisedModel,
    #[error("invalid {section}: {detail}")]
    Invalid {
        section: &'static str,
        detail: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ModelError {
    pub(crate) fn invalid(section: &'static str, detail: impl Into<String>) -> Self {
        ModelError::Invalid {
            section,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Softmax,
    Other(i32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Supervised,
    Other(i32),
}

/// Hyperparameters that affect inference. Training-only arguments from the
/// file header are read and dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelHyperparams {
    /// Embedding dimensionality.
    pub dim: usize,
    /// Number of hash buckets for character and word n-gram features.
    pub bucket: usize,
    /// Minimum character n-gram length (0 disables, together with `maxn`).
    pub minn: usize,
    /// Maximum character n-gram length.
    pub maxn: usize,
    /// Word n-gram order; 1 means single words only.
    pub word_ngrams: usize,
    pub loss_kind: LossKind,
    pub model_kind: ModelKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryKind {
    Word,
    Label,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DictEntry {
    pub surface: String,
    pub count: i64,
    pub kind: EntryKind,
}

/// The model dictionary: word entries first, then label entries, plus the
/// optional prune map of pruned models (hash-bucket id -> compact row).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDictionary {
    entries: Vec<DictEntry>,
    nwords: usize,
    nlabels: usize,
    ntokens: i64,
    index: HashMap<String, usize>,
    prune_map: Option<HashMap<u32, u32>>,
}

impl FeatureDictionary {
    pub fn new(
        entries: Vec<DictEntry>,
        nwords: usize,
        nlabels: usize,
        ntokens: i64,
        prune_map: Option<HashMap<u32, u32>>,
    ) -> Result<Self, ModelError> {
        if nwords + nlabels != entries.len() {
            return Err(ModelError::invalid(
                "dictionary",
                format!(
                    "entry count {} != nwords {} + nlabels {}",
                    entries.len(),
                    nwords,
                    nlabels
                ),
            ));
        }
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            let expected = if i < nwords {
                EntryKind::Word
            } else {
                EntryKind::Label
            };
            if e.kind != expected {
                return Err(ModelError::invalid(
                    "dictionary",
                    format!("entry {i} ({:?}) out of word/label order", e.surface),
                ));
            }
            if index.insert(e.surface.clone(), i).is_some() {
                return Err(ModelError::invalid(
                    "dictionary",
                    format!("duplicate entry {:?}", e.surface),
                ));
            }
        }
        Ok(FeatureDictionary {
            entries,
            nwords,
            nlabels,
            ntokens,
            index,
            prune_map,
        })
    }

    pub fn nwords(&self) -> usize {
        self.nwords
    }

    pub fn nlabels(&self) -> usize {
        self.nlabels
    }

    pub fn ntokens(&self) -> i64 {
        self.ntokens
    }

    pub fn entries(&self) -> &[DictEntry] {
        &self.entries
    }

    pub fn prune_map(&self) -> Option<&HashMap<u32, u32>> {
        self.prune_map.as_ref()
    }

    /// Entry index of a surface form, words and labels alike.
    pub fn lookup(&self, surface: &str) -> Option<usize> {
        self.index.get(surface).copied()
    }

    /// Word id of an in-vocabulary word (entry kind must be word).
    pub fn word_id(&self, surface: &str) -> Option<usize> {
        self.lookup(surface).filter(|&i| i < self.nwords)
    }

    /// Label string for label index `c` in `[0, nlabels)`.
    pub fn label(&self, c: usize) -> &str {
        &self.entries[self.nwords + c].surface
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries[self.nwords..].iter().map(|e| e.surface.as_str())
    }

    /// Label index for a label name, accepting the bare or prefixed form.
    pub fn label_index(&self, name: &str) -> Option<usize> {
        let ix = self.lookup(name).or_else(|| {
            if name.starts_with(LABEL_PREFIX) {
                None
            } else {
                self.lookup(&format!("{LABEL_PREFIX}{name}"))
            }
        })?;
        (ix >= self.nwords).then(|| ix - self.nwords)
    }

    /// Maps a hash-bucket id to an input-matrix row, honouring the prune
    /// map: with an empty map every hashed feature is dropped, and ids
    /// missing from a non-empty map are dropped.
    pub(crate) fn push_hash(&self, out: &mut Vec<usize>, bucket_id: u32) {
        match &self.prune_map {
            None => out.push(self.nwords + bucket_id as usize),
            Some(map) => {
                if let Some(&mapped) = map.get(&bucket_id) {
                    out.push(self.nwords + mapped as usize);
                }
            }
        }
    }
}

/// Row-major dense float32 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self, ModelError> {
        if data.len() != rows * cols {
            return Err(ModelError::invalid(
                "matrix",
                format!("{rows}x{cols} matrix with {} values", data.len()),
            ));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// `acc += row(r)`, float32 accumulation.
    pub fn add_row_to(&self, acc: &mut [f32], r: usize) {
        for (a, v) in acc.iter_mut().zip(self.row(r)) {
            *a += v;
        }
    }

    /// Dot product of row `r` with `v`, float32 accumulation.
    pub fn dot_row(&self, r: usize, v: &[f32]) -> f32 {
        let mut d = 0.0f32;
        for (a, b) in self.row(r).iter().zip(v) {
            d += a * b;
        }
        d
    }
}

/// A loaded supervised classifier. Immutable after construction; safe to
/// share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    hyperparams: ModelHyperparams,
    dictionary: FeatureDictionary,
    input: DenseMatrix,
    output: DenseMatrix,
}

impl ClassifierModel {
    /// Assembles a model, validating the cross-section invariants the
    /// loader relies on.
    pub fn from_parts(
        hyperparams: ModelHyperparams,
        dictionary: FeatureDictionary,
        input: DenseMatrix,
        output: DenseMatrix,
    ) -> Result<Self, ModelError> {
        if hyperparams.model_kind != ModelKind::Supervised {
            return Err(ModelError::NonSupervisedModel);
        }
        if hyperparams.dim == 0 {
            return Err(ModelError::invalid("args", "dim must be positive"));
        }
        if hyperparams.minn > hyperparams.maxn {
            return Err(ModelError::invalid(
                "args",
                format!("minn {} > maxn {}", hyperparams.minn, hyperparams.maxn),
            ));
        }
        if hyperparams.word_ngrams == 0 {
            return Err(ModelError::invalid("args", "wordNgrams must be >= 1"));
        }
        if hyperparams.bucket == 0 && (hyperparams.maxn > 0 || hyperparams.word_ngrams > 1) {
            return Err(ModelError::invalid(
                "args",
                "bucket must be positive when n-gram features are enabled",
            ));
        }
        if input.cols() != hyperparams.dim || output.cols() != hyperparams.dim {
            return Err(ModelError::invalid(
                "matrix",
                format!(
                    "matrix columns {}/{} disagree with dim {}",
                    input.cols(),
                    output.cols(),
                    hyperparams.dim
                ),
            ));
        }
        if output.rows() != dictionary.nlabels() {
            return Err(ModelError::invalid(
                "matrix",
                format!(
                    "output rows {} != nlabels {}",
                    output.rows(),
                    dictionary.nlabels()
                ),
            ));
        }
        match dictionary.prune_map() {
            None => {
                let expected = dictionary.nwords() + hyperparams.bucket;
                if input.rows() != expected {
                    return Err(ModelError::invalid(
                        "matrix",
                        format!("input rows {} != nwords + bucket {expected}", input.rows()),
                    ));
                }
            }
            Some(map) => {
                let span = input.rows().saturating_sub(dictionary.nwords());
                if map.values().any(|&v| v as usize >= span) {
                    return Err(ModelError::invalid(
                        "pruneidx",
                        "mapped id outside the input matrix",
                    ));
                }
            }
        }
        Ok(ClassifierModel {
            hyperparams,
            dictionary,
            input,
            output,
        })
    }

    pub fn hyperparams(&self) -> &ModelHyperparams {
        &self.hyperparams
    }

    pub fn dictionary(&self) -> &FeatureDictionary {
        &self.dictionary
    }

    /// Feature-embedding matrix; rows index word ids and hashed n-grams.
    pub fn input(&self) -> &DenseMatrix {
        &self.input
    }

    /// Per-label weight matrix; row `c` is the weight vector of label `c`.
    pub fn output(&self) -> &DenseMatrix {
        &self.output
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_label_strips_prefix() {
        assert_eq!(canonical_label("__label__tur_Latn"), "tur_Latn");
        assert_eq!(canonical_label("tur_Latn"), "tur_Latn");
    }

    #[test]
    fn dictionary_rejects_shuffled_entries() {
        let entries = vec![
            DictEntry {
                surface: "__label__x".into(),
                count: 1,
                kind: EntryKind::Label,
            },
            DictEntry {
                surface: "w".into(),
                count: 1,
                kind: EntryKind::Word,
            },
        ];
        assert!(FeatureDictionary::new(entries, 1, 1, 2, None).is_err());
    }

    #[test]
    fn dictionary_rejects_duplicate_labels() {
        let entries = vec![
            DictEntry {
                surface: "__label__x".into(),
                count: 1,
                kind: EntryKind::Label,
            },
            DictEntry {
                surface: "__label__x".into(),
                count: 1,
                kind: EntryKind::Label,
            },
        ];
        assert!(FeatureDictionary::new(entries, 0, 2, 0, None).is_err());
    }

    #[test]
    fn prune_map_drops_unmapped_ids() {
        let dict = FeatureDictionary::new(
            vec![DictEntry {
                surface: "w".into(),
                count: 1,
                kind: EntryKind::Word,
            }],
            1,
            0,
            0,
            Some(HashMap::from([(4u32, 0u32)])),
        )
        .unwrap();
        let mut out = Vec::new();
        dict.push_hash(&mut out, 4);
        dict.push_hash(&mut out, 5);
        assert_eq!(out, vec![1]);
    }
}
