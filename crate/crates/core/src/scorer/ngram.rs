//! Add-alpha smoothed n-gram model with backoff to the longest attested
//! context.
//!
//! For a query context the model picks the longest suffix (at most
//! `order - 1` words) that was seen followed by some word in training, and
//! estimates
//!
//! ```text
//! p(w | h) = (c(h, w) + alpha) / (c(h) + alpha * V)
//! ```
//!
//! where `V` counts every corpus type plus one unknown-word type. Because the
//! chosen context does not depend on `w`, the distribution sums to one over
//! the vocabulary for every query. With no attested context the empty
//! context (the unigram distribution) is used.
//!
//! The masked prior ranks words by this left-context conditional only; an
//! n-gram has no right context to offer.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{
    check_mask, floor_logprob, rank, ScoredWord, Scorer, ScorerDescriptor, ScorerError,
    ScorerKind, DEFAULT_LOG_FLOOR,
};
use crate::text::{normalize_word, tokenize};

#[derive(Debug, Default)]
struct ContextCounts {
    total: u64,
    next: HashMap<u32, u64>,
}

#[derive(Debug)]
pub struct NgramScorer {
    order: usize,
    alpha: f64,
    floor: f64,
    /// Sorted corpus types; the index is the word id.
    types: Vec<String>,
    ids: HashMap<String, u32>,
    /// Keyed by context word ids, the empty key holding unigram counts.
    contexts: HashMap<Vec<u32>, ContextCounts>,
    identity: String,
}

/// Trains an n-gram scorer on whitespace-tokenized sentences.
pub fn train_ngram<S: AsRef<str>>(
    corpus: &[S],
    order: usize,
    alpha: f64,
) -> Result<NgramScorer, ScorerError> {
    NgramScorer::train(corpus, order, alpha)
}

impl NgramScorer {
    pub fn train<S: AsRef<str>>(
        corpus: &[S],
        order: usize,
        alpha: f64,
    ) -> Result<Self, ScorerError> {
        if order == 0 {
            return Err(ScorerError::InvalidArgument("n-gram order must be at least 1".into()));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(ScorerError::InvalidArgument(format!(
                "smoothing alpha must be finite and positive, got {alpha}"
            )));
        }

        let sentences: Vec<Vec<String>> = corpus
            .iter()
            .map(|line| normalized_tokens(&tokenize(line.as_ref())))
            .filter(|s| !s.is_empty())
            .collect();
        if sentences.is_empty() {
            return Err(ScorerError::EmptyCorpus);
        }

        let mut types: Vec<String> = sentences.iter().flatten().cloned().collect();
        types.sort();
        types.dedup();
        let ids: HashMap<String, u32> = types
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();

        let mut contexts: HashMap<Vec<u32>, ContextCounts> = HashMap::new();
        let mut hasher = Sha256::new();
        for sentence in &sentences {
            hasher.update(sentence.join(" ").as_bytes());
            hasher.update(b"\n");
            let encoded: Vec<u32> = sentence.iter().map(|w| ids[w]).collect();
            for (pos, &word) in encoded.iter().enumerate() {
                let longest = (order - 1).min(pos);
                for len in 0..=longest {
                    let counts = contexts.entry(encoded[pos - len..pos].to_vec()).or_default();
                    counts.total += 1;
                    *counts.next.entry(word).or_insert(0) += 1;
                }
            }
        }
        let digest = hex::encode(hasher.finalize());
        let identity = format!("ngram:order={order}:alpha={alpha}:sha256={}", &digest[..16]);

        Ok(Self {
            order,
            alpha,
            floor: DEFAULT_LOG_FLOOR,
            types,
            ids,
            contexts,
            identity,
        })
    }

    /// Reads a corpus file with one sentence per line.
    pub fn from_corpus_file(path: &Path, order: usize, alpha: f64) -> Result<Self, ScorerError> {
        let text = fs::read_to_string(path).map_err(|source| ScorerError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let lines: Vec<&str> = text.lines().collect();
        Self::train(&lines, order, alpha)
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Corpus types, excluding the unknown-word type.
    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.types.iter().map(String::as_str)
    }

    /// Corpus types plus the unknown-word type.
    pub fn vocabulary_size(&self) -> usize {
        self.types.len() + 1
    }

    /// `ln p(<unk> | context)`, the mass reserved for every unseen word.
    pub fn unknown_logprob(&self, context: &[String]) -> f64 {
        let counts = self.context_counts(context);
        self.logprob_in(counts, None)
    }

    fn context_counts(&self, context: &[String]) -> &ContextCounts {
        let context = normalized_tokens(context);
        let usable = (self.order - 1).min(context.len());
        let tail = &context[context.len() - usable..];
        for len in (1..=usable).rev() {
            let suffix: Option<Vec<u32>> = tail[usable - len..]
                .iter()
                .map(|w| self.ids.get(w).copied())
                .collect();
            if let Some(counts) = suffix.and_then(|key| self.contexts.get(&key)) {
                if counts.total > 0 {
                    return counts;
                }
            }
        }
        &self.contexts[&Vec::new()]
    }

    fn logprob_in(&self, counts: &ContextCounts, word: Option<u32>) -> f64 {
        let seen = word.and_then(|w| counts.next.get(&w)).copied().unwrap_or(0);
        let numerator = seen as f64 + self.alpha;
        let denominator = counts.total as f64 + self.alpha * self.vocabulary_size() as f64;
        floor_logprob((numerator / denominator).ln(), self.floor)
    }
}

impl Scorer for NgramScorer {
    fn descriptor(&self) -> ScorerDescriptor {
        ScorerDescriptor {
            kind: ScorerKind::Ngram,
            identity: self.identity.clone(),
            vocabulary_size: Some(self.vocabulary_size() as u64),
        }
    }

    fn masked_topk(
        &self,
        words: &[String],
        mask_index: usize,
        k: usize,
    ) -> Result<Vec<ScoredWord>, ScorerError> {
        check_mask(words, mask_index, k)?;
        let counts = self.context_counts(&words[..mask_index]);
        let mut scored: Vec<ScoredWord> = self
            .types
            .iter()
            .enumerate()
            .map(|(id, word)| ScoredWord {
                word: word.clone(),
                logprob: self.logprob_in(counts, Some(id as u32)),
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
        self.conditional_logprob(&words[..mask_index], word)
    }

    fn conditional_logprob(&self, context: &[String], target: &str) -> Result<f64, ScorerError> {
        let counts = self.context_counts(context);
        let id = self.ids.get(&normalize_word(target)).copied();
        Ok(self.logprob_in(counts, id))
    }
}

fn normalized_tokens<S: AsRef<str>>(tokens: &[S]) -> Vec<String> {
    tokens
        .iter()
        .map(|t| normalize_word(t.as_ref()))
        .filter(|t| !t.is_empty())
        .collect()
}
