//! Dataset adapters: token-per-line files with per-token language tags,
//! and the canonical JSONL form (`{"text", "gold", "id"}`). A per-dataset
//! mapping file translates token tags to model labels; unmapped tags
//! (punctuation, named entities, "other") contribute nothing to the gold
//! set.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::{EvalError, GoldSentence};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    /// One `token<ws>tag` pair per line, blank line between sentences.
    TokenPerLine,
    /// One JSON object per line.
    Jsonl,
}

impl std::str::FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tokens" | "conll" | "token-per-line" => Ok(DatasetFormat::TokenPerLine),
            "jsonl" => Ok(DatasetFormat::Jsonl),
            other => Err(format!("unknown dataset format {other:?}")),
        }
    }
}

/// Token-tag to label translation, e.g. `tr -> tur_Latn`. Tags absent
/// from the map are ignored during gold-set construction.
#[derive(Debug, Clone, Default)]
pub struct LabelMap {
    map: HashMap<String, String>,
}

impl LabelMap {
    /// Parses `tag<ws>label` lines; `#` comments and blank lines ignored.
    pub fn parse(text: &str) -> Result<Self, EvalError> {
        let mut map = HashMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let tag = fields.next().unwrap();
            let label = fields.next().ok_or(EvalError::MalformedRecord {
                line: no + 1,
                msg: format!("mapping line needs `tag label`, got {line:?}"),
            })?;
            map.insert(tag.to_string(), label.to_string());
        }
        Ok(LabelMap { map })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn resolve(&self, tag: &str) -> Option<&str> {
        self.map.get(tag).map(String::as_str)
    }
}

/// Reads a dataset file in the given format. The label map applies to
/// token-per-line tags only; without one, tags pass through verbatim.
pub fn ingest_token_labeled(
    path: impl AsRef<Path>,
    format: DatasetFormat,
    map: Option<&LabelMap>,
) -> Result<Vec<GoldSentence>, EvalError> {
    let text = fs::read_to_string(path)?;
    match format {
        DatasetFormat::TokenPerLine => parse_token_per_line(&text, map),
        DatasetFormat::Jsonl => parse_jsonl(&text),
    }
}

/// Groups `token tag` lines into sentences at blank lines. The sentence
/// text joins the tokens with single spaces; the gold set is the set of
/// distinct (mapped) tags. Sentences whose gold set ends up empty are
/// dropped — there is nothing to score them against.
pub fn parse_token_per_line(
    text: &str,
    map: Option<&LabelMap>,
) -> Result<Vec<GoldSentence>, EvalError> {
    let mut sentences = Vec::new();
    let mut tokens: Vec<&str> = Vec::new();
    let mut gold: BTreeSet<String> = BTreeSet::new();
    let mut start_line = 1usize;

    let mut flush = |tokens: &mut Vec<&str>, gold: &mut BTreeSet<String>, start: usize| {
        if !tokens.is_empty() && !gold.is_empty() {
            sentences.push(GoldSentence {
                text: tokens.join(" "),
                gold: std::mem::take(gold),
                id: format!("line-{start}"),
            });
        }
        tokens.clear();
        gold.clear();
    };

    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches(['\r']);
        if line.trim().is_empty() {
            flush(&mut tokens, &mut gold, start_line);
            start_line = no + 2;
            continue;
        }
        let mut fields = line.split_whitespace();
        let token = fields.next().unwrap();
        let tag = fields.last().ok_or(EvalError::MalformedRecord {
            line: no + 1,
            msg: format!("expected `token tag`, got {line:?}"),
        })?;
        if tokens.is_empty() {
            start_line = no + 1;
        }
        tokens.push(token);
        match map {
            Some(m) => {
                if let Some(label) = m.resolve(tag) {
                    gold.insert(label.to_string());
                }
            }
            None => {
                gold.insert(tag.to_string());
            }
        }
    }
    flush(&mut tokens, &mut gold, start_line);
    Ok(sentences)
}

#[derive(Deserialize)]
struct JsonlRecord {
    text: String,
    gold: Vec<String>,
    #[serde(default)]
    id: Option<String>,
}

/// Parses the canonical JSONL form. Gold labels pass through unchanged
/// (minus any `__label__` prefix); empty text or gold is malformed.
pub fn parse_jsonl(text: &str) -> Result<Vec<GoldSentence>, EvalError> {
    let mut sentences = Vec::new();
    for (no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: JsonlRecord =
            serde_json::from_str(line).map_err(|e| EvalError::MalformedRecord {
                line: no + 1,
                msg: e.to_string(),
            })?;
        if record.text.trim().is_empty() {
            return Err(EvalError::MalformedRecord {
                line: no + 1,
                msg: "empty text".into(),
            });
        }
        if record.gold.is_empty() {
            return Err(EvalError::MalformedRecord {
                line: no + 1,
                msg: "empty gold set".into(),
            });
        }
        sentences.push(GoldSentence {
            text: record.text,
            gold: record
                .gold
                .iter()
                .map(|l| crate::model::canonical_label(l).to_string())
                .collect(),
            id: record.id.unwrap_or_else(|| format!("line-{}", no + 1)),
        });
    }
    Ok(sentences)
}
