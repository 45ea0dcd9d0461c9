//! Code-switching language identification on top of fastText-format
//! sentence classifiers.
//!
//! The library loads a supervised model in the fastText binary format,
//! computes sentence-level predictions restricted to an arbitrary label
//! subset, and runs an iterative masking procedure that turns a
//! single-label classifier into a set predictor: each round identifies the
//! dominant language, records which words cued it, masks those words, and
//! re-classifies the residual. The result is the set of languages in a
//! sentence together with per-language word assignments.
//!
//! ```no_run
//! use masklid::{inference, mask, model};
//!
//! let model = model::load_model("lid.bin").unwrap();
//! let subset = inference::LabelSubset::full(&model);
//! let cfg = mask::MaskLIDConfig::default();
//! let pred = mask::masklid("bir kahve falling in love", &model, &subset, &cfg).unwrap();
//! for a in &pred.assignments {
//!     println!("{} {:?}", model.dictionary().label(a.label), a.words);
//! }
//! ```

pub mod eval;
pub mod inference;
pub mod mask;
pub mod model;

pub use inference::{LabelSubset, Prediction, SentenceFeatures, WordLogitMatrix};
pub use mask::{LanguageAssignment, MaskLIDConfig, SentencePrediction, TerminationReason};
pub use model::{ClassifierModel, ModelError};
