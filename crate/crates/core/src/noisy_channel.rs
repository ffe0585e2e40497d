//! Candidate corrections for a target word and the Bayesian posterior over
//! them.
//!
//! Candidates come from filling the masked target slot with the scorer's
//! top-k words. Each candidate `w` gets the unnormalized log score
//!
//! ```text
//! log p(w) - lambda * d(x, w)
//! ```
//!
//! where `p(w)` is the masked-fill prior, `x` the word actually observed and
//! `d` the (raw or length-normalized) Levenshtein distance. The posterior is
//! the softmax of those scores over the candidate set.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::lexdist::{levenshtein, EditDistance};
use crate::scorer::{Scorer, ScorerError};
use crate::text::{normalize_word, strip_punctuation};

/// Score gaps beyond this are not exponentiated relative to the veridical
/// word; the maximum is used as the anchor instead.
const ANCHOR_GAP_LIMIT: f64 = 700.0;

#[derive(Debug, thiserror::Error)]
pub enum NoisyChannelError {
    #[error("target index {index} out of range for a {len}-word sentence")]
    TargetOutOfRange { index: usize, len: usize },
    #[error("target word {0:?} is empty after stripping punctuation")]
    EmptyTarget(String),
    #[error("candidate set is empty")]
    EmptyCandidates,
    #[error("non-finite prior log-probability for candidate {0:?}")]
    NonFinitePrior(String),
    #[error("invalid noise parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMode {
    Raw,
    #[default]
    Normalized,
}

impl DistanceMode {
    pub fn value(self, distance: &EditDistance) -> f64 {
        match self {
            DistanceMode::Raw => distance.raw as f64,
            DistanceMode::Normalized => distance.normalized,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Penalty rate of the exponential noise model, `>= 0`.
    pub lambda: f64,
    pub distance_mode: DistanceMode,
    pub top_k: usize,
    pub force_include_veridical: bool,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            distance_mode: DistanceMode::Normalized,
            top_k: 100,
            force_include_veridical: true,
        }
    }
}

impl NoiseParams {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), NoisyChannelError> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(NoisyChannelError::InvalidParams(format!(
                "lambda must be finite and non-negative, got {}",
                self.lambda
            )));
        }
        if self.top_k == 0 {
            return Err(NoisyChannelError::InvalidParams("top_k must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Comparison form (case-folded, punctuation-stripped).
    pub word: String,
    /// Form as produced by the scorer, used for scoring and reports.
    pub surface: String,
    pub prior_logprob: f64,
    pub distance: EditDistance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedCandidate {
    #[serde(flatten)]
    pub candidate: Candidate,
    pub posterior_prob: f64,
    pub log_posterior: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    /// Sorted by descending posterior, ties by word.
    pub candidates: Vec<WeightedCandidate>,
    pub veridical_word: String,
    pub veridical_rank: Option<usize>,
}

impl Posterior {
    pub fn veridical_prob(&self) -> f64 {
        self.veridical_rank
            .map_or(0.0, |r| self.candidates[r].posterior_prob)
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        entropy(self.candidates.iter().map(|c| (c.posterior_prob, c.log_posterior)))
    }

    pub fn map_word(&self) -> &str {
        &self.candidates[0].candidate.word
    }
}

/// Top-k fills of the target slot, each paired with its distance to the
/// observed word.
///
/// Fills are normalized and deduplicated (keeping the highest prior). When
/// `force_include_veridical` is set and the observed word is not among the
/// fills, it is appended with its own masked-fill log-probability.
pub fn generate_candidates(
    sentence: &[String],
    target_index: usize,
    scorer: &dyn Scorer,
    params: &NoiseParams,
) -> Result<Vec<Candidate>, NoisyChannelError> {
    params.validate()?;
    let observed = sentence
        .get(target_index)
        .ok_or(NoisyChannelError::TargetOutOfRange {
            index: target_index,
            len: sentence.len(),
        })?;
    let veridical_surface = strip_punctuation(observed);
    let veridical = normalize_word(observed);
    if veridical.is_empty() {
        return Err(NoisyChannelError::EmptyTarget(observed.clone()));
    }

    let fills = scorer.masked_topk(sentence, target_index, params.top_k)?;
    let mut candidates: Vec<Candidate> = Vec::with_capacity(fills.len() + 1);
    let mut seen: HashMap<String, usize> = HashMap::new();
    for fill in fills {
        let word = normalize_word(&fill.word);
        if word.is_empty() {
            continue;
        }
        if let Some(&i) = seen.get(&word) {
            if fill.logprob > candidates[i].prior_logprob {
                candidates[i].prior_logprob = fill.logprob;
                candidates[i].surface = strip_punctuation(&fill.word).to_string();
            }
            continue;
        }
        seen.insert(word.clone(), candidates.len());
        candidates.push(Candidate {
            distance: levenshtein(&word, &veridical),
            surface: strip_punctuation(&fill.word).to_string(),
            word,
            prior_logprob: fill.logprob,
        });
    }

    match seen.get(&veridical) {
        // score the veridical hypothesis with the observed surface form so
        // that a point mass on it reproduces the plain surprisal exactly
        Some(&i) => candidates[i].surface = veridical_surface.to_string(),
        None if params.force_include_veridical => {
            let prior = scorer.masked_logprob(sentence, target_index, veridical_surface)?;
            candidates.push(Candidate {
                word: veridical,
                surface: veridical_surface.to_string(),
                prior_logprob: prior,
                distance: EditDistance::ZERO,
            });
        }
        None => {}
    }
    Ok(candidates)
}

/// Log-posterior of every candidate, in input order.
pub fn log_posterior(
    candidates: &[Candidate],
    params: &NoiseParams,
) -> Result<Vec<f64>, NoisyChannelError> {
    params.validate()?;
    if candidates.is_empty() {
        return Err(NoisyChannelError::EmptyCandidates);
    }
    if let Some(bad) = candidates.iter().find(|c| !c.prior_logprob.is_finite()) {
        return Err(NoisyChannelError::NonFinitePrior(bad.word.clone()));
    }

    let scores: Vec<f64> = candidates
        .iter()
        .map(|c| c.prior_logprob - params.lambda * params.distance_mode.value(&c.distance))
        .collect();
    let (max_index, max_score) = scores
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, s)| if s > best.1 { (i, s) } else { best });

    // Anchoring on the zero-distance candidate makes each term
    // exp(s_j - s_anchor) non-increasing in lambda, so the veridical mass is
    // monotone in lambda even under rounding.
    let anchor = candidates
        .iter()
        .position(|c| c.distance.raw == 0)
        .filter(|&v| max_score - scores[v] <= ANCHOR_GAP_LIMIT)
        .unwrap_or(max_index);
    let anchor_score = scores[anchor];
    let log_z = scores
        .iter()
        .map(|s| (s - anchor_score).exp())
        .sum::<f64>()
        .ln();
    Ok(scores.iter().map(|s| s - anchor_score - log_z).collect())
}

/// The posterior over `candidates` given the observed word `veridical`.
pub fn posterior(
    candidates: &[Candidate],
    veridical: &str,
    params: &NoiseParams,
) -> Result<Posterior, NoisyChannelError> {
    let logs = log_posterior(candidates, params)?;
    let mut weighted: Vec<WeightedCandidate> = candidates
        .iter()
        .zip(logs)
        .map(|(c, lp)| WeightedCandidate {
            candidate: c.clone(),
            posterior_prob: lp.exp(),
            log_posterior: lp,
        })
        .collect();
    weighted.sort_by(|a, b| {
        b.log_posterior
            .total_cmp(&a.log_posterior)
            .then_with(|| a.candidate.word.cmp(&b.candidate.word))
    });
    let veridical_word = normalize_word(veridical);
    let veridical_rank = weighted
        .iter()
        .position(|c| c.candidate.word == veridical_word);
    Ok(Posterior {
        candidates: weighted,
        veridical_word,
        veridical_rank,
    })
}

/// Entropy in nats from `(p, ln p)` pairs; zero-probability terms contribute 0.
pub(crate) fn entropy(terms: impl Iterator<Item = (f64, f64)>) -> f64 {
    let h: f64 = terms
        .filter(|(p, _)| *p > 0.0)
        .map(|(p, lp)| -p * lp)
        .sum();
    h.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::TableScorer;
    use crate::text::tokenize;

    fn cand(word: &str, prior: f64, raw: usize, normalized: f64) -> Candidate {
        Candidate {
            word: word.into(),
            surface: word.into(),
            prior_logprob: prior,
            distance: EditDistance { raw, normalized },
        }
    }

    #[test]
    fn hand_evaluated_softmax() {
        let cs = [cand("w1", 0.5f64.ln(), 0, 0.0), cand("w2", 0.5f64.ln(), 1, 0.5)];
        let params = NoiseParams {
            lambda: 3f64.ln(),
            distance_mode: DistanceMode::Raw,
            ..NoiseParams::default()
        };
        let post = posterior(&cs, "w1", &params).unwrap();
        assert!((post.candidates[0].posterior_prob - 0.75).abs() < 1e-15);
        assert!((post.candidates[1].posterior_prob - 0.25).abs() < 1e-15);
        assert_eq!(post.veridical_rank, Some(0));
    }

    #[test]
    fn zero_lambda_renormalizes_prior() {
        let cs = [
            cand("a", 0.4f64.ln(), 3, 0.6),
            cand("b", 0.1f64.ln(), 0, 0.0),
            cand("c", 0.3f64.ln(), 1, 0.2),
        ];
        let post = posterior(&cs, "b", &NoiseParams::with_lambda(0.0)).unwrap();
        let probs: Vec<(String, f64)> = post
            .candidates
            .iter()
            .map(|c| (c.candidate.word.clone(), c.posterior_prob))
            .collect();
        assert_eq!(probs[0].0, "a");
        assert!((probs[0].1 - 0.5).abs() < 1e-15);
        assert!((probs[1].1 - 0.375).abs() < 1e-15);
        assert!((probs[2].1 - 0.125).abs() < 1e-15);
    }

    #[test]
    fn huge_lambda_concentrates_on_veridical() {
        let cs = [
            cand("anecdote", 0.9f64.ln(), 2, 0.25),
            cand("antidote", 1e-12f64.ln(), 0, 0.0),
            cand("story", 0.05f64.ln(), 7, 0.875),
        ];
        let post = posterior(&cs, "antidote", &NoiseParams::with_lambda(1e6)).unwrap();
        assert!(post.veridical_prob() >= 1.0 - 1e-9);
        assert_eq!(post.map_word(), "antidote");
        assert!(post.entropy() < 1e-9);
    }

    #[test]
    fn ties_break_lexicographically() {
        let cs = [cand("b", -1.0, 1, 0.5), cand("a", -1.0, 1, 0.5)];
        let post = posterior(&cs, "c", &NoiseParams::with_lambda(1.0)).unwrap();
        assert_eq!(post.candidates[0].candidate.word, "a");
        assert_eq!(post.veridical_rank, None);
        assert_eq!(post.veridical_prob(), 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            posterior(&[], "x", &NoiseParams::default()),
            Err(NoisyChannelError::EmptyCandidates)
        ));
        let cs = [cand("a", f64::NEG_INFINITY, 0, 0.0)];
        assert!(matches!(
            posterior(&cs, "a", &NoiseParams::default()),
            Err(NoisyChannelError::NonFinitePrior(_))
        ));
        let cs = [cand("a", -1.0, 0, 0.0)];
        for lambda in [-1.0, f64::NAN, f64::INFINITY] {
            assert!(posterior(&cs, "a", &NoiseParams::with_lambda(lambda)).is_err());
        }
        let params = NoiseParams {
            top_k: 0,
            ..NoiseParams::default()
        };
        assert!(params.validate().is_err());
    }

    #[test]
    fn extreme_score_gaps_stay_finite() {
        let cs = [cand("a", 0.0, 1, 1.0), cand("b", -1e6, 0, 0.0), cand("c", 0.0, 1, 1.0)];
        let post = posterior(&cs, "b", &NoiseParams::with_lambda(0.0)).unwrap();
        let total: f64 = post.candidates.iter().map(|c| c.posterior_prob).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(post.candidates.iter().all(|c| c.posterior_prob.is_finite()));
        assert_eq!(post.veridical_prob(), 0.0);
    }

    fn table_lm() -> TableScorer {
        TableScorer::new().with_masked_default(&[("anecdote", 0.7), ("antidote", 0.2), ("hearse", 0.1)])
    }

    #[test]
    fn candidates_carry_prior_and_distance() {
        let sentence = tokenize("an amusing antidote.");
        let params = NoiseParams {
            top_k: 3,
            ..NoiseParams::default()
        };
        let cs = generate_candidates(&sentence, 2, &table_lm(), &params).unwrap();
        let summary: Vec<(&str, f64, usize)> = cs
            .iter()
            .map(|c| (c.word.as_str(), c.prior_logprob, c.distance.raw))
            .collect();
        assert_eq!(summary[0], ("anecdote", 0.7f64.ln(), 2));
        assert_eq!(summary[1], ("antidote", 0.2f64.ln(), 0));
        assert_eq!(summary[2].0, "hearse");
        assert!(summary[2].2 >= 5);
        // surface of the veridical hypothesis is the observed word without the period
        assert_eq!(cs[1].surface, "antidote");
    }

    #[test]
    fn forced_inclusion_appends_veridical() {
        let sentence = tokenize("an amusing antidote");
        let params = NoiseParams {
            top_k: 1,
            ..NoiseParams::default()
        };
        let cs = generate_candidates(&sentence, 2, &table_lm(), &params).unwrap();
        assert_eq!(cs.len(), 2);
        assert_eq!(cs.iter().filter(|c| c.distance.raw == 0).count(), 1);
        assert_eq!(cs[1].prior_logprob, 0.2f64.ln());

        let unforced = NoiseParams {
            force_include_veridical: false,
            ..params
        };
        assert_eq!(generate_candidates(&sentence, 2, &table_lm(), &unforced).unwrap().len(), 1);
    }

    #[test]
    fn top_fill_equal_to_target_appears_once() {
        let sentence = tokenize("an amusing Anecdote");
        let cs = generate_candidates(&sentence, 2, &table_lm(), &NoiseParams::default()).unwrap();
        assert_eq!(cs.iter().filter(|c| c.word == "anecdote").count(), 1);
        assert_eq!(cs.len(), 3);
        assert_eq!(cs[0].distance, EditDistance::ZERO);
        assert_eq!(cs[0].surface, "Anecdote");
    }

    #[test]
    fn duplicates_keep_max_prior() {
        let lm = TableScorer::new();
        struct Dup(TableScorer);
        impl Scorer for Dup {
            fn descriptor(&self) -> crate::scorer::ScorerDescriptor {
                self.0.descriptor()
            }
            fn masked_topk(
                &self,
                _: &[String],
                _: usize,
                _: usize,
            ) -> Result<Vec<crate::scorer::ScoredWord>, ScorerError> {
                Ok(vec![
                    crate::scorer::ScoredWord { word: "Dog".into(), logprob: -1.0 },
                    crate::scorer::ScoredWord { word: "dog,".into(), logprob: -0.5 },
                    crate::scorer::ScoredWord { word: "...".into(), logprob: -0.1 },
                ])
            }
            fn masked_logprob(&self, w: &[String], i: usize, x: &str) -> Result<f64, ScorerError> {
                self.0.masked_logprob(w, i, x)
            }
            fn conditional_logprob(&self, c: &[String], t: &str) -> Result<f64, ScorerError> {
                self.0.conditional_logprob(c, t)
            }
        }
        let sentence = tokenize("the dog");
        let params = NoiseParams {
            force_include_veridical: false,
            ..NoiseParams::default()
        };
        let cs = generate_candidates(&sentence, 1, &Dup(lm), &params).unwrap();
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].prior_logprob, -0.5);
        assert_eq!(cs[0].surface, "dog");
    }

    #[test]
    fn target_errors() {
        let sentence = tokenize("a b");
        let lm = table_lm();
        assert!(matches!(
            generate_candidates(&sentence, 2, &lm, &NoiseParams::default()),
            Err(NoisyChannelError::TargetOutOfRange { index: 2, len: 2 })
        ));
        let sentence = tokenize("a --");
        assert!(matches!(
            generate_candidates(&sentence, 1, &lm, &NoiseParams::default()),
            Err(NoisyChannelError::EmptyTarget(_))
        ));
    }
}
