//! A scorer backed by explicit probability tables.
//!
//! Useful for toy experiments where the prior and the conditionals must be
//! known exactly. Masked distributions are keyed by the sentence with the
//! masked slot replaced by `<mask>`; conditional distributions by the left
//! context. Both fall back to a default table, and words missing from the
//! applicable table receive the log floor.

use std::collections::{BTreeMap, BTreeSet};

use sha2::{Digest, Sha256};

use super::{
    check_mask, floor_logprob, rank, ScoredWord, Scorer, ScorerDescriptor, ScorerError,
    ScorerKind, DEFAULT_LOG_FLOOR, MASK_TOKEN,
};
use crate::text::{normalize_word, tokenize};

type Table = BTreeMap<String, f64>;

#[derive(Debug, Clone)]
pub struct TableScorer {
    masked_default: Table,
    masked: BTreeMap<String, Table>,
    conditional_default: Table,
    conditional: BTreeMap<String, Table>,
    floor: f64,
}

impl Default for TableScorer {
    fn default() -> Self {
        Self::new()
    }
}

impl TableScorer {
    pub fn new() -> Self {
        Self {
            masked_default: Table::new(),
            masked: BTreeMap::new(),
            conditional_default: Table::new(),
            conditional: BTreeMap::new(),
            floor: DEFAULT_LOG_FLOOR,
        }
    }

    /// Same uniform distribution for every masked slot and every context.
    pub fn uniform(words: &[&str]) -> Self {
        let p = 1.0 / words.len() as f64;
        let entries: Vec<(&str, f64)> = words.iter().map(|w| (*w, p)).collect();
        Self::new()
            .with_masked_default(&entries)
            .with_conditional_default(&entries)
    }

    pub fn with_masked_default(mut self, entries: &[(&str, f64)]) -> Self {
        self.masked_default = table(entries);
        self
    }

    /// Distribution for one masked sentence, written with a literal `<mask>`
    /// token, e.g. `"an amusing <mask> ."`.
    pub fn with_masked(mut self, masked_sentence: &str, entries: &[(&str, f64)]) -> Self {
        let tokens = tokenize(masked_sentence);
        let slot = tokens
            .iter()
            .position(|t| t.starts_with(MASK_TOKEN))
            .expect("masked sentence must contain <mask>");
        self.masked.insert(masked_key(&tokens, slot), table(entries));
        self
    }

    pub fn with_conditional_default(mut self, entries: &[(&str, f64)]) -> Self {
        self.conditional_default = table(entries);
        self
    }

    /// Distribution of the next word after `context`.
    pub fn with_conditional(mut self, context: &str, entries: &[(&str, f64)]) -> Self {
        self.conditional.insert(context_key(&tokenize(context)), table(entries));
        self
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self
    }

    fn masked_table(&self, words: &[String], mask_index: usize) -> &Table {
        self.masked
            .get(&masked_key(words, mask_index))
            .unwrap_or(&self.masked_default)
    }

    fn lookup(&self, table: &Table, word: &str) -> f64 {
        let p = table.get(&normalize_word(word)).copied().unwrap_or(0.0);
        floor_logprob(p.ln(), self.floor)
    }
}

impl Scorer for TableScorer {
    fn descriptor(&self) -> ScorerDescriptor {
        let mut vocabulary = BTreeSet::new();
        let mut hasher = Sha256::new();
        let tables = std::iter::once(("", &self.masked_default))
            .chain(self.masked.iter().map(|(k, t)| (k.as_str(), t)))
            .chain(std::iter::once(("", &self.conditional_default)))
            .chain(self.conditional.iter().map(|(k, t)| (k.as_str(), t)));
        for (key, table) in tables {
            hasher.update(key.as_bytes());
            hasher.update(b"\x1f");
            for (word, p) in table {
                vocabulary.insert(word.as_str());
                hasher.update(word.as_bytes());
                hasher.update(p.to_le_bytes());
            }
            hasher.update(b"\x1e");
        }
        let digest = hex::encode(hasher.finalize());
        ScorerDescriptor {
            kind: ScorerKind::Table,
            identity: format!("table:sha256={}", &digest[..16]),
            vocabulary_size: Some(vocabulary.len().max(1) as u64),
        }
    }

    fn masked_topk(
        &self,
        words: &[String],
        mask_index: usize,
        k: usize,
    ) -> Result<Vec<ScoredWord>, ScorerError> {
        check_mask(words, mask_index, k)?;
        let mut scored: Vec<ScoredWord> = self
            .masked_table(words, mask_index)
            .iter()
            .map(|(word, &p)| ScoredWord {
                word: word.clone(),
                logprob: floor_logprob(p.ln(), self.floor),
            })
            .collect();
        rank(&mut scored);
        scored.truncate(k);
        Ok(scored)
    }

    fn masked_logprob(
        &self,
        words: &[String],
        mask_index: usize,
        word: &str,
    ) -> Result<f64, ScorerError> {
        check_mask(words, mask_index, 1)?;
        Ok(self.lookup(self.masked_table(words, mask_index), word))
    }

    fn conditional_logprob(&self, context: &[String], target: &str) -> Result<f64, ScorerError> {
        let table = self
            .conditional
            .get(&context_key(context))
            .unwrap_or(&self.conditional_default);
        Ok(self.lookup(table, target))
    }
}

fn table(entries: &[(&str, f64)]) -> Table {
    entries
        .iter()
        .map(|(w, p)| {
            assert!((0.0..=1.0).contains(p), "probability of {w:?} outside [0, 1]");
            (normalize_word(w), *p)
        })
        .collect()
}

fn context_key<S: AsRef<str>>(context: &[S]) -> String {
    context
        .iter()
        .map(|w| normalize_word(w.as_ref()))
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

fn masked_key<S: AsRef<str>>(words: &[S], slot: usize) -> String {
    words
        .iter()
        .enumerate()
        .map(|(i, w)| {
            if i == slot {
                MASK_TOKEN.to_string()
            } else {
                normalize_word(w.as_ref())
            }
        })
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn reads_back_tabulated_fills() {
        let lm = TableScorer::new().with_masked_default(&[("a", 0.9), ("b", 0.1)]);
        let top = lm.masked_topk(&words("x y"), 1, 2).unwrap();
        assert_eq!(
            top,
            vec![
                ScoredWord { word: "a".into(), logprob: 0.9f64.ln() },
                ScoredWord { word: "b".into(), logprob: 0.1f64.ln() },
            ]
        );
        let top1 = lm.masked_topk(&words("x y"), 0, 1).unwrap();
        assert_eq!(top1, vec![ScoredWord { word: "a".into(), logprob: 0.9f64.ln() }]);
    }

    #[test]
    fn uniform_conditional() {
        let lm = TableScorer::uniform(&["w", "x", "y", "z"]);
        for t in ["w", "x", "y", "z"] {
            assert_eq!(lm.conditional_logprob(&words("any context"), t).unwrap(), 0.25f64.ln());
        }
        assert_eq!(lm.conditional_logprob(&[], "x").unwrap(), 0.25f64.ln());
    }

    #[test]
    fn keyed_tables_override_defaults() {
        let lm = TableScorer::new()
            .with_masked_default(&[("a", 1.0)])
            .with_masked("an amusing <mask>.", &[("anecdote", 0.7), ("hearse", 0.3)])
            .with_conditional("an amusing", &[("anecdote", 0.5)]);
        let top = lm.masked_topk(&words("An amusing hearse."), 2, 5).unwrap();
        assert_eq!(top[0].word, "anecdote");
        assert_eq!(lm.masked_topk(&words("a b c"), 1, 5).unwrap()[0].word, "a");
        assert_eq!(
            lm.conditional_logprob(&words("an Amusing"), "anecdote").unwrap(),
            0.5f64.ln()
        );
        assert_eq!(
            lm.conditional_logprob(&words("an amusing"), "hearse").unwrap(),
            DEFAULT_LOG_FLOOR
        );
    }

    #[test]
    fn identity_tracks_contents() {
        let a = TableScorer::uniform(&["a", "b"]).descriptor();
        let b = TableScorer::uniform(&["a", "b"]).descriptor();
        let c = TableScorer::uniform(&["a", "c"]).descriptor();
        assert_eq!(a, b);
        assert_ne!(a.identity, c.identity);
        assert_eq!(a.vocabulary_size, Some(2));
    }
}
