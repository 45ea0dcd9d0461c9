//! Reader for the supervised fastText binary model format (version 12,
//! little-endian). Quantized files are rejected.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, ErrorKind};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt};

use super::{
    ClassifierModel, DenseMatrix, DictEntry, EntryKind, FeatureDictionary, LossKind,
    ModelError, ModelHyperparams, ModelKind,
};

/// File magic, little-endian int32 at offset 0.
pub const MAGIC: i32 = 793_712_314;
/// The only supported format version.
pub const FORMAT_VERSION: i32 = 12;

const LOSS_SOFTMAX: i32 = 3;
const MODEL_SUPERVISED: i32 = 3;

/// Loads a model file. The file is never modified; the returned model is
/// immutable and safe to share across threads.
pub fn load_model(path: impl AsRef<Path>) -> Result<ClassifierModel, ModelError> {
    let file = File::open(path)?;
    let mut reader = BufReader::new(file);
    read_model(&mut reader)
}

/// Parses a model from any buffered reader. Trailing bytes after the
/// output matrix are ignored, matching the reference reader.
pub fn read_model<R: BufRead>(r: &mut R) -> Result<ClassifierModel, ModelError> {
    let magic = read_i32(r, "header")?;
    if magic != MAGIC {
        return Err(ModelError::BadMagic(magic as u32));
    }
    let version = read_i32(r, "header")?;
    if version != FORMAT_VERSION {
        return Err(ModelError::UnsupportedVersion(version));
    }

    let hyperparams = read_args(r)?;
    let dictionary = read_dictionary(r)?;

    let quant_input = read_bool(r, "input matrix")?;
    if quant_input {
        return Err(ModelError::QuantizedUnsupported);
    }
    let input = read_matrix(r, "input matrix")?;
    // Output quantization flag; with a dense input the reference reads a
    // dense output regardless of its value.
    let _qout = read_bool(r, "output matrix")?;
    let output = read_matrix(r, "output matrix")?;

    ClassifierModel::from_parts(hyperparams, dictionary, input, output)
}

fn read_args<R: BufRead>(r: &mut R) -> Result<ModelHyperparams, ModelError> {
    const SECTION: &str = "args";
    let dim = read_i32(r, SECTION)?;
    let _ws = read_i32(r, SECTION)?;
    let _epoch = read_i32(r, SECTION)?;
    let _min_count = read_i32(r, SECTION)?;
    let _neg = read_i32(r, SECTION)?;
    let word_ngrams = read_i32(r, SECTION)?;
    let loss = read_i32(r, SECTION)?;
    let model = read_i32(r, SECTION)?;
    let bucket = read_i32(r, SECTION)?;
    let minn = read_i32(r, SECTION)?;
    let maxn = read_i32(r, SECTION)?;
    let _lr_update_rate = read_i32(r, SECTION)?;
    let _t = r
        .read_f64::<LittleEndian>()
        .map_err(|e| map_eof(e, SECTION))?;

    if model != MODEL_SUPERVISED {
        return Err(ModelError::NonSupervisedModel);
    }
    for (name, v) in [("dim", dim), ("bucket", bucket), ("minn", minn), ("maxn", maxn)] {
        if v < 0 {
            return Err(ModelError::invalid(SECTION, format!("negative {name} ({v})")));
        }
    }
    if dim == 0 {
        return Err(ModelError::invalid(SECTION, "dim must be positive"));
    }
    if word_ngrams < 1 {
        return Err(ModelError::invalid(
            SECTION,
            format!("wordNgrams must be >= 1, got {word_ngrams}"),
        ));
    }
    Ok(ModelHyperparams {
        dim: dim as usize,
        bucket: bucket as usize,
        minn: minn as usize,
        maxn: maxn as usize,
        word_ngrams: word_ngrams as usize,
        loss_kind: if loss == LOSS_SOFTMAX {
            LossKind::Softmax
        } else {
            LossKind::Other(loss)
        },
        model_kind: ModelKind::Supervised,
    })
}

fn read_dictionary<R: BufRead>(r: &mut R) -> Result<FeatureDictionary, ModelError> {
    const SECTION: &str = "dictionary";
    let size = read_i32(r, SECTION)?;
    let nwords = read_i32(r, SECTION)?;
    let nlabels = read_i32(r, SECTION)?;
    let ntokens = read_i64(r, SECTION)?;
    let pruneidx_size = read_i64(r, SECTION)?;

    if size < 0 || nwords < 0 || nlabels < 0 {
        return Err(ModelError::invalid(SECTION, "negative entry count"));
    }
    if pruneidx_size < -1 {
        return Err(ModelError::invalid(
            SECTION,
            format!("pruneidx size {pruneidx_size}"),
        ));
    }

    let mut entries = Vec::new();
    let mut word_buf = Vec::new();
    for i in 0..size {
        word_buf.clear();
        let n = r.read_until(0, &mut word_buf)?;
        if n == 0 || *word_buf.last().unwrap() != 0 {
            return Err(ModelError::TruncatedFile(SECTION));
        }
        word_buf.pop();
        let surface = String::from_utf8(word_buf.clone())
            .map_err(|_| ModelError::invalid(SECTION, format!("entry {i} is not UTF-8")))?;
        let count = read_i64(r, SECTION)?;
        let kind = match read_u8(r, SECTION)? {
            0 => EntryKind::Word,
            1 => EntryKind::Label,
            other => {
                return Err(ModelError::invalid(
                    SECTION,
                    format!("entry {i} has unknown type {other}"),
                ))
            }
        };
        entries.push(DictEntry { surface, count, kind });
    }

    let prune_map = if pruneidx_size >= 0 {
        let mut map = HashMap::with_capacity(pruneidx_size.min(1 << 20) as usize);
        for _ in 0..pruneidx_size {
            let from = read_i32(r, "pruneidx")?;
            let to = read_i32(r, "pruneidx")?;
            if from < 0 || to < 0 {
                return Err(ModelError::invalid("pruneidx", "negative id"));
            }
            map.insert(from as u32, to as u32);
        }
        Some(map)
    } else {
        None
    };

    FeatureDictionary::new(entries, nwords as usize, nlabels as usize, ntokens, prune_map)
}

fn read_matrix<R: BufRead>(r: &mut R, section: &'static str) -> Result<DenseMatrix, ModelError> {
    let rows = read_i64(r, section)?;
    let cols = read_i64(r, section)?;
    if rows < 0 || cols < 0 {
        return Err(ModelError::invalid(section, "negative dimension"));
    }
    let total = (rows as u64)
        .checked_mul(cols as u64)
        .filter(|&t| usize::try_from(t).is_ok())
        .ok_or_else(|| ModelError::invalid(section, "dimensions overflow"))?
        as usize;

    // Read in bounded chunks so a corrupt header cannot trigger a huge
    // up-front allocation; truncation surfaces at the first short chunk.
    const CHUNK: usize = 1 << 16;
    let mut data = Vec::new();
    let mut buf = vec![0f32; CHUNK.min(total.max(1))];
    let mut remaining = total;
    while remaining > 0 {
        let take = CHUNK.min(remaining);
        r.read_f32_into::<LittleEndian>(&mut buf[..take])
            .map_err(|e| map_eof(e, section))?;
        if buf[..take].iter().any(|v| !v.is_finite()) {
            return Err(ModelError::invalid(section, "non-finite value"));
        }
        data.extend_from_slice(&buf[..take]);
        remaining -= take;
    }
    DenseMatrix::new(rows as usize, cols as usize, data)
}

fn read_i32<R: BufRead>(r: &mut R, section: &'static str) -> Result<i32, ModelError> {
    r.read_i32::<LittleEndian>().map_err(|e| map_eof(e, section))
}

fn read_i64<R: BufRead>(r: &mut R, section: &'static str) -> Result<i64, ModelError> {
    r.read_i64::<LittleEndian>().map_err(|e| map_eof(e, section))
}

fn read_u8<R: BufRead>(r: &mut R, section: &'static str) -> Result<u8, ModelError> {
    r.read_u8().map_err(|e| map_eof(e, section))
}

fn read_bool<R: BufRead>(r: &mut R, section: &'static str) -> Result<bool, ModelError> {
    Ok(read_u8(r, section)? != 0)
}

fn map_eof(e: std::io::Error, section: &'static str) -> ModelError {
    if e.kind() == ErrorKind::UnexpectedEof {
        ModelError::TruncatedFile(section)
    } else {
        ModelError::Io(e)
    }
}
