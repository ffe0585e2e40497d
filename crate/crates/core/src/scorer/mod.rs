//! The language-model boundary.
//!
//! Every model used by the pipeline answers two questions:
//!
//! * which words could fill a masked slot, with their log-probabilities
//!   ([`Scorer::masked_topk`]), and
//! * how probable a word is given its left context
//!   ([`Scorer::conditional_logprob`]).
//!
//! Three implementations are provided: [`NgramScorer`] trained from a plain
//! text corpus, [`TableScorer`] built from hand-written probability tables,
//! and [`RemoteScorer`] which talks to the transformer scoring service.
//! All log-probabilities are natural logs, clamped to `[floor, 0]`.

mod ngram;
pub mod remote;
mod table;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use ngram::{train_ngram, NgramScorer};
pub use remote::{RemoteConfig, RemoteScorer};
pub use table::TableScorer;

/// `ln(1e-12)`, the default lower bound on every returned log-probability.
pub const DEFAULT_LOG_FLOOR: f64 = -27.631_021_115_928_547;

/// Placeholder used in masked-sentence keys.
pub const MASK_TOKEN: &str = "<mask>";

#[derive(Debug, thiserror::Error)]
pub enum ScorerError {
    #[error("scorer unavailable: {0}")]
    Unavailable(String),
    #[error("scorer protocol error: {0}")]
    Protocol(String),
    #[error("corpus contains no tokens")]
    EmptyCorpus,
    #[error("invalid scorer argument: {0}")]
    InvalidArgument(String),
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredWord {
    pub word: String,
    /// Natural-log probability, `floor <= logprob <= 0`.
    pub logprob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    Ngram,
    Remote,
    Table,
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScorerKind::Ngram => "ngram",
            ScorerKind::Remote => "remote",
            ScorerKind::Table => "table",
        })
    }
}

/// Reproducibility key recorded in every report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScorerDescriptor {
    pub kind: ScorerKind,
    /// Model name(s) or corpus fingerprint; stable for the same model/corpus.
    pub identity: String,
    /// `None` when the remote service does not advertise its vocabulary.
    pub vocabulary_size: Option<u64>,
}

/// A language model usable by the pipeline. Implementations must be safe to
/// call from several worker threads at once.
pub trait Scorer: Send + Sync {
    fn descriptor(&self) -> ScorerDescriptor;

    /// Up to `k` distinct words for position `mask_index` of `words`, sorted
    /// by non-increasing log-probability. Log-probabilities come from the
    /// model's full distribution and are not renormalized over the top `k`.
    fn masked_topk(
        &self,
        words: &[String],
        mask_index: usize,
        k: usize,
    ) -> Result<Vec<ScoredWord>, ScorerError>;

    /// Log-probability of one particular fill of the masked slot, used when
    /// a word has to be scored that did not make the top `k`.
    fn masked_logprob(
        &self,
        words: &[String],
        mask_index: usize,
        word: &str,
    ) -> Result<f64, ScorerError>;

    /// `ln p(target | context)` under the left-to-right model. `context` may
    /// be empty.
    fn conditional_logprob(&self, context: &[String], target: &str) -> Result<f64, ScorerError>;
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn descriptor(&self) -> ScorerDescriptor {
        (**self).descriptor()
    }

    fn masked_topk(
        &self,
        words: &[String],
        mask_index: usize,
        k: usize,
    ) -> Result<Vec<ScoredWord>, ScorerError> {
        (**self).masked_topk(words, mask_index, k)
    }

    fn masked_logprob(
        &self,
        words: &[String],
        mask_index: usize,
        word: &str,
    ) -> Result<f64, ScorerError> {
        (**self).masked_logprob(words, mask_index, word)
    }

    fn conditional_logprob(&self, context: &[String], target: &str) -> Result<f64, ScorerError> {
        (**self).conditional_logprob(context, target)
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn descriptor(&self) -> ScorerDescriptor {
        (**self).descriptor()
    }

    fn masked_topk(
        &self,
        words: &[String],
        mask_index: usize,
        k: usize,
    ) -> Result<Vec<ScoredWord>, ScorerError> {
        (**self).masked_topk(words, mask_index, k)
    }

    fn masked_logprob(
        &self,
        words: &[String],
        mask_index: usize,
        word: &str,
    ) -> Result<f64, ScorerError> {
        (**self).masked_logprob(words, mask_index, word)
    }

    fn conditional_logprob(&self, context: &[String], target: &str) -> Result<f64, ScorerError> {
        (**self).conditional_logprob(context, target)
    }
}

/// Clamps a log-probability into `[floor, 0]`; NaN maps to the floor.
pub fn floor_logprob(logprob: f64, floor: f64) -> f64 {
    if logprob.is_nan() {
        floor
    } else {
        logprob.clamp(floor, 0.0)
    }
}

pub(crate) fn check_mask(words: &[String], mask_index: usize, k: usize) -> Result<(), ScorerError> {
    if mask_index >= words.len() {
        return Err(ScorerError::InvalidArgument(format!(
            "mask index {mask_index} out of range for {} words",
            words.len()
        )));
    }
    if k == 0 {
        return Err(ScorerError::InvalidArgument("k must be at least 1".into()));
    }
    Ok(())
}

/// Sorts by non-increasing log-probability, ties broken by word.
pub(crate) fn rank(words: &mut [ScoredWord]) {
    words.sort_by(|a, b| b.logprob.total_cmp(&a.logprob).then_with(|| a.word.cmp(&b.word)));
}
