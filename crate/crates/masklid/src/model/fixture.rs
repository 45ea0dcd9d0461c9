//! Test support: builds small synthetic models, both in memory and as
//! binary files in the on-disk format. Used by the test suites and the
//! fuzz targets; also handy for trying the CLI without a real model.

use std::io::{self, Write};

use byteorder::{LittleEndian, WriteBytesExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    ClassifierModel, DenseMatrix, DictEntry, EntryKind, FeatureDictionary, LossKind,
    ModelError, ModelHyperparams, ModelKind, MAGIC,
};

/// Builder for synthetic supervised models. Matrices default to seeded
/// uniform values in [-0.5, 0.5); set them explicitly for hand-computed
/// oracles.
#[derive(Debug, Clone)]
pub struct FixtureBuilder {
    dim: usize,
    bucket: usize,
    minn: usize,
    maxn: usize,
    word_ngrams: usize,
    words: Vec<(String, i64)>,
    labels: Vec<(String, i64)>,
    input: Option<Vec<f32>>,
    output: Option<Vec<f32>>,
    seed: u64,
}

impl FixtureBuilder {
    pub fn new(dim: usize, bucket: usize) -> Self {
        FixtureBuilder {
            dim,
            bucket,
            minn: 0,
            maxn: 0,
            word_ngrams: 1,
            words: Vec::new(),
            labels: Vec::new(),
            input: None,
            output: None,
            seed: 7,
        }
    }

    pub fn char_ngrams(mut self, minn: usize, maxn: usize) -> Self {
        self.minn = minn;
        self.maxn = maxn;
        self
    }

    pub fn word_ngrams(mut self, order: usize) -> Self {
        self.word_ngrams = order;
        self
    }

    pub fn word(mut self, surface: &str) -> Self {
        let count = 1000 - self.words.len() as i64;
        self.words.push((surface.to_string(), count));
        self
    }

    pub fn words(mut self, surfaces: &[&str]) -> Self {
        for s in surfaces {
            self = self.word(s);
        }
        self
    }

    /// Adds a label; bare names get the `__label__` prefix.
    pub fn label(mut self, name: &str) -> Self {
        let surface = if name.starts_with(super::LABEL_PREFIX) {
            name.to_string()
        } else {
            format!("{}{name}", super::LABEL_PREFIX)
        };
        let count = 500 - self.labels.len() as i64;
        self.labels.push((surface, count));
        self
    }

    pub fn labels(mut self, names: &[&str]) -> Self {
        for n in names {
            self = self.label(n);
        }
        self
    }

    /// Row-major (nwords + bucket) x dim input matrix.
    pub fn input_matrix(mut self, data: Vec<f32>) -> Self {
        self.input = Some(data);
        self
    }

    /// Row-major nlabels x dim output matrix.
    pub fn output_matrix(mut self, data: Vec<f32>) -> Self {
        self.output = Some(data);
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn input_data(&self) -> Vec<f32> {
        match &self.input {
            Some(d) => d.clone(),
            None => random_values(
                (self.words.len() + self.bucket) * self.dim,
                self.seed,
            ),
        }
    }

    fn output_data(&self) -> Vec<f32> {
        match &self.output {
            Some(d) => d.clone(),
            None => random_values(self.labels.len() * self.dim, self.seed ^ 0x5eed),
        }
    }

    /// Assembles the in-memory model directly, without a round trip
    /// through bytes.
    pub fn build(&self) -> Result<ClassifierModel, ModelError> {
        let entries: Vec<DictEntry> = self
            .words
            .iter()
            .map(|(s, c)| DictEntry {
                surface: s.clone(),
                count: *c,
                kind: EntryKind::Word,
            })
            .chain(self.labels.iter().map(|(s, c)| DictEntry {
                surface: s.clone(),
                count: *c,
                kind: EntryKind::Label,
            }))
            .collect();
        let ntokens = entries.iter().map(|e| e.count).sum();
        let dict =
            FeatureDictionary::new(entries, self.words.len(), self.labels.len(), ntokens, None)?;
        let input = DenseMatrix::new(
            self.words.len() + self.bucket,
            self.dim,
            self.input_data(),
        )?;
        let output = DenseMatrix::new(self.labels.len(), self.dim, self.output_data())?;
        ClassifierModel::from_parts(self.hyperparams(), dict, input, output)
    }

    fn hyperparams(&self) -> ModelHyperparams {
        ModelHyperparams {
            dim: self.dim,
            bucket: self.bucket,
            minn: self.minn,
            maxn: self.maxn,
            word_ngrams: self.word_ngrams,
            loss_kind: LossKind::Softmax,
            model_kind: ModelKind::Supervised,
        }
    }

    /// Emits the binary file format for this fixture.
    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_i32::<LittleEndian>(MAGIC)?;
        w.write_i32::<LittleEndian>(super::FORMAT_VERSION)?;
        // args: dim ws epoch minCount neg wordNgrams loss model bucket minn maxn lrUpdateRate, then t.
        for v in [
            self.dim as i32,
            5,
            5,
            1,
            5,
            self.word_ngrams as i32,
            3,
            3,
            self.bucket as i32,
            self.minn as i32,
            self.maxn as i32,
            100,
        ] {
            w.write_i32::<LittleEndian>(v)?;
        }
        w.write_f64::<LittleEndian>(1e-4)?;

        let size = self.words.len() + self.labels.len();
        w.write_i32::<LittleEndian>(size as i32)?;
        w.write_i32::<LittleEndian>(self.words.len() as i32)?;
        w.write_i32::<LittleEndian>(self.labels.len() as i32)?;
        let ntokens: i64 = self.words.iter().chain(&self.labels).map(|(_, c)| c).sum();
        w.write_i64::<LittleEndian>(ntokens)?;
        w.write_i64::<LittleEndian>(-1)?;
        for (entry_type, group) in [(0i8, &self.words), (1i8, &self.labels)] {
            for (surface, count) in group {
                w.write_all(surface.as_bytes())?;
                w.write_u8(0)?;
                w.write_i64::<LittleEndian>(*count)?;
                w.write_i8(entry_type)?;
            }
        }

        w.write_u8(0)?; // quantized input: no
        write_matrix(w, self.words.len() + self.bucket, self.dim, &self.input_data())?;
        w.write_u8(0)?; // quantized output: no
        write_matrix(w, self.labels.len(), self.dim, &self.output_data())?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to Vec cannot fail");
        buf
    }
}

fn write_matrix<W: Write>(w: &mut W, rows: usize, cols: usize, data: &[f32]) -> io::Result<()> {
    w.write_i64::<LittleEndian>(rows as i64)?;
    w.write_i64::<LittleEndian>(cols as i64)?;
    for v in data {
        w.write_f32::<LittleEndian>(*v)?;
    }
    Ok(())
}

fn random_values(n: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen::<f32>() - 0.5).collect()
}

/// A ready-made three-language fixture: every in-vocabulary word strongly
/// cues one label, with a weaker decoy language ranked second in each
/// column so that top-2 membership is selective even with three labels.
pub fn three_language_fixture() -> ClassifierModel {
    let dim = 4;
    let words = [
        ("alpha", 0usize),
        ("anchor", 0),
        ("apple", 0),
        ("ashore", 0),
        ("bravo", 1),
        ("burrow", 1),
        ("bubble", 1),
        ("basket", 1),
        ("clover", 2),
        ("candle", 2),
        ("copper", 2),
        ("cinder", 2),
    ];
    let bucket = 16;
    let decoy = [2usize, 2, 1];
    let mut input = vec![0.0f32; (words.len() + bucket) * dim];
    for (i, (_, lang)) in words.iter().enumerate() {
        input[i * dim + lang] = 4.0;
        input[i * dim + decoy[*lang]] = 1.0;
    }
    let mut output = vec![0.0f32; 3 * dim];
    for c in 0..3 {
        output[c * dim + c] = 4.0;
    }
    FixtureBuilder::new(dim, bucket)
        .words(&words.iter().map(|(w, _)| *w).collect::<Vec<_>>())
        .labels(&["lang_a", "lang_b", "lang_c"])
        .input_matrix(input)
        .output_matrix(output)
        .build()
        .expect("fixture is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::read_model;

    #[test]
    fn written_fixture_loads_back() {
        let fx = FixtureBuilder::new(4, 16)
            .words(&["aa", "bb"])
            .labels(&["x", "y"]);
        let bytes = fx.to_bytes();
        let loaded = read_model(&mut &bytes[..]).unwrap();
        assert_eq!(loaded, fx.build().unwrap());
        assert_eq!(loaded.dictionary().nlabels(), 2);
        assert_eq!(loaded.hyperparams().dim, 4);
    }

    #[test]
    fn loading_twice_is_identical() {
        let bytes = FixtureBuilder::new(3, 8).word("w").label("l").to_bytes();
        let a = read_model(&mut &bytes[..]).unwrap();
        let b = read_model(&mut &bytes[..]).unwrap();
        assert_eq!(a, b);
    }
}
