//! Splitting the surprisal of a target word into heuristic surprise and
//! discrepancy signal.
//!
//! For an observed word `x` after context `c`:
//!
//! ```text
//! S = -ln p(x | c)
//! A = sum_w post(w) * (-ln p(w | c))
//! B = S - A = sum_w post(w) * ln(p(w | c) / p(x | c))
//! ```
//!
//! where `post` is the noisy-channel posterior over heuristic words for the
//! target slot. Only the target is corrected; the context is taken as
//! observed. All quantities are in nats.
//!
//! Scoring (prior fills, distances and conditionals) is independent of the
//! noise rate, so [`score_item`] does the model calls once and
//! [`ScoredItem::decompose`] can then be evaluated cheaply for any lambda.

use serde::{Deserialize, Serialize};

use crate::experiment::{Condition, Stimulus};
use crate::noisy_channel::{self, entropy, Candidate, NoiseParams, NoisyChannelError, Posterior};
use crate::scorer::Scorer;
use crate::text::normalize_word;

#[derive(Debug, thiserror::Error)]
#[error("item {item_id} ({condition}): {source}")]
pub struct DecompositionError {
    pub item_id: String,
    pub condition: Condition,
    #[source]
    pub source: NoisyChannelError,
}

impl DecompositionError {
    fn new(stimulus: &Stimulus, source: impl Into<NoisyChannelError>) -> Self {
        Self {
            item_id: stimulus.item_id.clone(),
            condition: stimulus.condition.clone(),
            source: source.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub item_id: String,
    pub condition: Condition,
    pub lambda: f64,
    /// True surprisal of the observed word.
    pub surprisal_s: f64,
    /// Heuristic surprise.
    pub heuristic_a: f64,
    /// Discrepancy signal, `surprisal_s - heuristic_a`.
    pub discrepancy_b: f64,
    pub posterior_entropy: f64,
    pub veridical_posterior: f64,
    pub veridical_rank: Option<usize>,
    pub n_candidates: usize,
    /// Highest-posterior heuristic word.
    pub map_word: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub candidate: Candidate,
    /// `-ln p(w | context)`.
    pub surprisal: f64,
}

/// All model outputs needed to decompose one stimulus at any lambda.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub item_id: String,
    pub condition: Condition,
    pub veridical: String,
    pub surprisal: f64,
    pub candidates: Vec<ScoredCandidate>,
}

pub fn score_item(
    stimulus: &Stimulus,
    scorer: &dyn Scorer,
    params: &NoiseParams,
) -> Result<ScoredItem, DecompositionError> {
    let err = |e: NoisyChannelError| DecompositionError::new(stimulus, e);
    let candidates = noisy_channel::generate_candidates(
        &stimulus.words,
        stimulus.target_index,
        scorer,
        params,
    )
    .map_err(err)?;

    let context = stimulus.context();
    let surprisal = -scorer
        .conditional_logprob(context, stimulus.target())
        .map_err(|e| err(e.into()))?;
    let candidates = candidates
        .into_iter()
        .map(|candidate| {
            let logprob = scorer.conditional_logprob(context, &candidate.surface)?;
            Ok(ScoredCandidate {
                candidate,
                surprisal: -logprob,
            })
        })
        .collect::<Result<Vec<_>, crate::scorer::ScorerError>>()
        .map_err(|e| err(e.into()))?;

    Ok(ScoredItem {
        item_id: stimulus.item_id.clone(),
        condition: stimulus.condition.clone(),
        veridical: normalize_word(stimulus.target()),
        surprisal,
        candidates,
    })
}

/// Scores and decomposes one stimulus.
pub fn decompose(
    stimulus: &Stimulus,
    scorer: &dyn Scorer,
    params: &NoiseParams,
) -> Result<Decomposition, DecompositionError> {
    score_item(stimulus, scorer, params)?.decompose(params)
}

impl ScoredItem {
    fn bare_candidates(&self) -> Vec<Candidate> {
        self.candidates.iter().map(|c| c.candidate.clone()).collect()
    }

    fn error(&self, source: NoisyChannelError) -> DecompositionError {
        DecompositionError {
            item_id: self.item_id.clone(),
            condition: self.condition.clone(),
            source,
        }
    }

    /// Posterior over the heuristic words; uses `lambda` and the distance
    /// mode of `params` (the candidate set was fixed at scoring time).
    pub fn posterior(&self, params: &NoiseParams) -> Result<Posterior, DecompositionError> {
        noisy_channel::posterior(&self.bare_candidates(), &self.veridical, params)
            .map_err(|e| self.error(e))
    }

    pub fn decompose(&self, params: &NoiseParams) -> Result<Decomposition, DecompositionError> {
        let logs = noisy_channel::log_posterior(&self.bare_candidates(), params)
            .map_err(|e| self.error(e))?;

        let heuristic_a: f64 = self
            .candidates
            .iter()
            .zip(&logs)
            .map(|(c, lp)| lp.exp() * c.surprisal)
            .sum();
        let discrepancy_b = self.surprisal - heuristic_a;

        let veridical_index = self
            .candidates
            .iter()
            .position(|c| c.candidate.word == self.veridical);
        let mut order: Vec<usize> = (0..logs.len()).collect();
        order.sort_by(|&i, &j| {
            logs[j]
                .total_cmp(&logs[i])
                .then_with(|| self.candidates[i].candidate.word.cmp(&self.candidates[j].candidate.word))
        });

        Ok(Decomposition {
            item_id: self.item_id.clone(),
            condition: self.condition.clone(),
            lambda: params.lambda,
            surprisal_s: self.surprisal,
            heuristic_a,
            discrepancy_b,
            posterior_entropy: entropy(logs.iter().map(|lp| (lp.exp(), *lp))),
            veridical_posterior: veridical_index.map_or(0.0, |v| logs[v].exp()),
            veridical_rank: veridical_index.and_then(|v| order.iter().position(|&i| i == v)),
            n_candidates: self.candidates.len(),
            map_word: self.candidates[order[0]].candidate.word.clone(),
        })
    }

    /// The discrepancy signal evaluated directly as the posterior expectation
    /// of `ln p(w | c) - ln p(x | c)`. Equal to `S - A` up to rounding.
    pub fn discrepancy_expectation(&self, params: &NoiseParams) -> Result<f64, DecompositionError> {
        let logs = noisy_channel::log_posterior(&self.bare_candidates(), params)
            .map_err(|e| self.error(e))?;
        Ok(self
            .candidates
            .iter()
            .zip(&logs)
            .map(|(c, lp)| lp.exp() * (self.surprisal - c.surprisal))
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::TableScorer;

    fn stimulus(sentence: &str, index: usize) -> Stimulus {
        Stimulus::new("1", Condition::Control, sentence, index, None).unwrap()
    }

    fn toy() -> TableScorer {
        TableScorer::new()
            .with_masked_default(&[("anecdote", 0.7), ("antidote", 0.2), ("hearse", 0.1)])
            .with_conditional_default(&[("anecdote", 0.5), ("antidote", 0.01), ("hearse", 0.001)])
    }

    #[test]
    fn three_candidate_hand_evaluation() {
        let s = stimulus("an amusing antidote.", 2);
        let d = decompose(&s, &toy(), &NoiseParams::with_lambda(0.0)).unwrap();
        let expected_a = -(0.7 * 0.5f64.ln() + 0.2 * 0.01f64.ln() + 0.1 * 0.001f64.ln());
        assert!((d.heuristic_a - expected_a).abs() < 1e-12);
        assert!((d.surprisal_s + 0.01f64.ln()).abs() < 1e-15);
        assert!((d.discrepancy_b - (-(0.01f64.ln()) - expected_a)).abs() < 1e-12);
        assert_eq!(d.n_candidates, 3);
        assert_eq!(d.map_word, "anecdote");
        assert_eq!(d.veridical_rank, Some(1));
    }

    #[test]
    fn point_mass_on_veridical() {
        let lm = TableScorer::new()
            .with_masked_default(&[("dog", 1.0)])
            .with_conditional_default(&[("dog", 0.3)]);
        let d = decompose(&stimulus("the dog", 1), &lm, &NoiseParams::with_lambda(2.0)).unwrap();
        assert_eq!(d.heuristic_a, d.surprisal_s);
        assert_eq!(d.discrepancy_b, 0.0);
        assert_eq!(d.veridical_posterior, 1.0);
        assert_eq!(d.posterior_entropy, 0.0);
    }

    #[test]
    fn large_lambda_recovers_surprisal() {
        let s = stimulus("an amusing antidote", 2);
        let d = decompose(&s, &toy(), &NoiseParams::with_lambda(1e6)).unwrap();
        assert!(d.discrepancy_b.abs() <= 1e-6);
        assert!((d.heuristic_a - d.surprisal_s).abs() <= 1e-6);
    }

    #[test]
    fn bracket_matches_residual() {
        let scored = score_item(&stimulus("an amusing hearse", 2), &toy(), &NoiseParams::default()).unwrap();
        for lambda in [0.0, 0.5, 3.0, 40.0] {
            let params = NoiseParams::with_lambda(lambda);
            let d = scored.decompose(&params).unwrap();
            let direct = scored.discrepancy_expectation(&params).unwrap();
            assert!((d.discrepancy_b - direct).abs() < 1e-12);
            assert!((d.heuristic_a + d.discrepancy_b - d.surprisal_s).abs() <= 1e-9);
        }
    }

    #[test]
    fn posterior_agrees_with_decomposition_diagnostics() {
        let scored = score_item(&stimulus("an amusing antidote", 2), &toy(), &NoiseParams::default()).unwrap();
        let params = NoiseParams::with_lambda(5.0);
        let post = scored.posterior(&params).unwrap();
        let d = scored.decompose(&params).unwrap();
        assert_eq!(post.veridical_rank, d.veridical_rank);
        assert!((post.veridical_prob() - d.veridical_posterior).abs() < 1e-15);
        assert!((post.entropy() - d.posterior_entropy).abs() < 1e-12);
        assert_eq!(post.map_word(), d.map_word);
    }

    #[test]
    fn errors_name_the_item() {
        let s = Stimulus::new("item-9", Condition::Sem, "a ...", 1, None).unwrap();
        let err = decompose(&s, &toy(), &NoiseParams::default()).unwrap_err();
        assert_eq!(err.item_id, "item-9");
        assert!(err.to_string().contains("item-9"));
    }
}
