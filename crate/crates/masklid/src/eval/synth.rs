//! Synthetic code-switched sentences for hyperparameter sweeps: a
//! contiguous word span from one corpus concatenated with one from the
//! other, with both language shares bounded from below.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EvalError, GoldSentence};
use crate::model::tokenize;

const MAX_ATTEMPTS: usize = 256;

/// Generates `count` sentences, each concatenating a contiguous word span
/// from a sentence of each corpus. Each span contributes at least
/// `min_fraction` of the combined span bytes (the joining space is not
/// counted); the output gold set is the union of the two source sets.
/// Deterministic for a fixed seed.
pub fn synthesize_cs(
    corpus_a: &[GoldSentence],
    corpus_b: &[GoldSentence],
    min_fraction: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<GoldSentence>, EvalError> {
    if corpus_a.is_empty() || corpus_b.is_empty() {
        return Err(EvalError::InsufficientData("empty source corpus".into()));
    }
    if !(min_fraction > 0.0 && min_fraction <= 0.5) {
        return Err(EvalError::InsufficientData(format!(
            "min_fraction {min_fraction} outside (0, 0.5]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for n in 0..count {
        let mut made = false;
        for _ in 0..MAX_ATTEMPTS {
            let sa = &corpus_a[rng.gen_range(0..corpus_a.len())];
            let sb = &corpus_b[rng.gen_range(0..corpus_b.len())];
            let wa = tokenize(&sa.text);
            let wb = tokenize(&sb.text);
            if wa.is_empty() || wb.is_empty() {
                continue;
            }
            let span_a = random_span(&mut rng, &wa);
            let a_bytes = joined_len(&span_a);
            // Feasible b spans: min(a, b) / (a + b) >= f.
            let candidates = feasible_spans(&wb, a_bytes, min_fraction);
            if candidates.is_empty() {
                continue;
            }
            let (lo, hi) = candidates[rng.gen_range(0..candidates.len())];
            let span_b = &wb[lo..hi];
            let text = format!("{} {}", span_a.join(" "), span_b.join(" "));
            let gold = sa.gold.union(&sb.gold).cloned().collect();
            out.push(GoldSentence {
                text,
                gold,
                id: format!("synth-{n}"),
            });
            made = true;
            break;
        }
        if !made {
            return Err(EvalError::InsufficientData(format!(
                "no span pair satisfies min_fraction {min_fraction}"
            )));
        }
    }
    Ok(out)
}

fn random_span<'a>(rng: &mut ChaCha8Rng, words: &[&'a str]) -> Vec<&'a str> {
    let start = rng.gen_range(0..words.len());
    let end = rng.gen_range(start + 1..=words.len());
    words[start..end].to_vec()
}

fn joined_len(words: &[&str]) -> usize {
    if words.is_empty() {
        return 0;
    }
    words.iter().map(|w| w.len()).sum::<usize>() + words.len() - 1
}

fn feasible_spans(words: &[&str], a_bytes: usize, f: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for lo in 0..words.len() {
        for hi in lo + 1..=words.len() {
            let b = joined_len(&words[lo..hi]);
            let total = (a_bytes + b) as f64;
            if (a_bytes.min(b) as f64) / total >= f {
                out.push((lo, hi));
            }
        }
    }
    out
}
