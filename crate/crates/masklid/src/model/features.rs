//! Feature extraction: the hash function, character n-grams over
//! boundary-wrapped words, and word n-grams over token hashes.
//!
//! Every detail here is pinned to the reference classifier so that feature
//! ids computed for a real model match what that model was trained with.

use super::{FeatureDictionary, ModelHyperparams, EOS, LABEL_PREFIX};

pub const FNV_OFFSET_BASIS: u32 = 2_166_136_261;
pub const FNV_PRIME: u32 = 16_777_619;
const WORD_NGRAM_PRIME: u64 = 116_049_371;

/// FNV-1a over the token bytes. The reference implementation hashes
/// `char` values through `int8_t`, so bytes >= 0x80 are sign-extended
/// before the XOR; this matters for every non-ASCII token.
pub fn hash_token(bytes: &[u8]) -> u32 {
    let mut h = FNV_OFFSET_BASIS;
    for &b in bytes {
        h ^= b as i8 as u32;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Splits a line on the reference separator set: space, tab, newline,
/// carriage return, vertical tab, form feed, and NUL. No Unicode
/// whitespace, no normalization.
pub fn tokenize(line: &str) -> Vec<&str> {
    line.split(is_separator).filter(|t| !t.is_empty()).collect()
}

pub(crate) fn is_separator(c: char) -> bool {
    matches!(c, ' ' | '\t' | '\n' | '\r' | '\x0b' | '\x0c' | '\0')
}

pub(crate) fn is_label_token(token: &str, dict: &FeatureDictionary) -> bool {
    match dict.lookup(token) {
        Some(ix) => ix >= dict.nwords(),
        None => token.starts_with(LABEL_PREFIX),
    }
}

/// All input-matrix rows contributed by one token: the word id when the
/// token is in the dictionary, plus hashed character n-grams of length
/// `minn..=maxn` over the `<`-wrapped form. `</s>` never gets n-grams.
pub fn subword_ids(
    word: &str,
    hp: &ModelHyperparams,
    dict: &FeatureDictionary,
) -> Vec<usize> {
    let mut ids = Vec::new();
    if let Some(wid) = dict.word_id(word) {
        if hp.maxn == 0 {
            ids.push(wid);
            return ids;
        }
        ids.push(wid);
        if word != EOS {
            push_char_ngram_ids(word, hp, dict, &mut ids);
        }
        return ids;
    }
    if word != EOS && hp.maxn > 0 {
        push_char_ngram_ids(word, hp, dict, &mut ids);
    }
    ids
}

/// Character n-grams are taken over the bytes of `<word>`; n counts
/// characters, and UTF-8 continuation bytes never start or split a gram.
/// Single-character grams at either boundary (a bare `<` or `>`) are
/// skipped.
fn push_char_ngram_ids(
    word: &str,
    hp: &ModelHyperparams,
    dict: &FeatureDictionary,
    out: &mut Vec<usize>,
) {
    if hp.bucket == 0 {
        return;
    }
    let mut wrapped = Vec::with_capacity(word.len() + 2);
    wrapped.push(b'<');
    wrapped.extend_from_slice(word.as_bytes());
    wrapped.push(b'>');
    let len = wrapped.len();
    let bucket = hp.bucket as u32;
    for i in 0..len {
        if wrapped[i] & 0xC0 == 0x80 {
            continue;
        }
        let mut j = i;
        let mut n = 1usize;
        while j < len && n <= hp.maxn {
            j += 1;
            while j < len && wrapped[j] & 0xC0 == 0x80 {
                j += 1;
            }
            if n >= hp.minn && !(n == 1 && (i == 0 || j == len)) {
                dict.push_hash(out, hash_token(&wrapped[i..j]) % bucket);
            }
            n += 1;
        }
    }
}

/// Hashed word n-grams of length 2..=order over consecutive token hashes.
/// Token hashes travel as int32 in the reference and are sign-extended to
/// uint64 when combined; order 1 yields nothing.
pub fn word_ngram_ids(
    hashes: &[u32],
    order: usize,
    hp: &ModelHyperparams,
    dict: &FeatureDictionary,
) -> Vec<usize> {
    let mut ids = Vec::new();
    if order <= 1 || hp.bucket == 0 {
        return ids;
    }
    let sext = |h: u32| h as i32 as i64 as u64;
    for i in 0..hashes.len() {
        let mut h = sext(hashes[i]);
        let end = hashes.len().min(i + order);
        for &next in &hashes[i + 1..end] {
            h = h.wrapping_mul(WORD_NGRAM_PRIME).wrapping_add(sext(next));
            dict.push_hash(&mut ids, (h % hp.bucket as u64) as u32);
        }
    }
    ids
}
