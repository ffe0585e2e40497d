use proptest::prelude::*;
use surprisal_split::decomposition::score_item;
use surprisal_split::experiment::{effect_sizes, summarize, Condition, Stimulus};
use surprisal_split::lexdist::levenshtein;
use surprisal_split::noisy_channel::{log_posterior, posterior, Candidate, DistanceMode, NoiseParams};
use surprisal_split::scorer::{NgramScorer, Scorer};

const WORDS: [&str; 8] = ["cat", "cart", "art", "dog", "dot", "cog", "at", "tar"];

fn candidate_set() -> impl Strategy<Value = (Vec<Candidate>, String)> {
    (
        proptest::sample::subsequence(WORDS.to_vec(), 1..=WORDS.len()),
        proptest::collection::vec(-30.0f64..0.0, WORDS.len()),
        any::<proptest::sample::Index>(),
    )
        .prop_map(|(words, priors, pick)| {
            let observed = words[pick.index(words.len())].to_string();
            let candidates = words
                .iter()
                .zip(priors)
                .map(|(w, prior)| Candidate {
                    word: w.to_string(),
                    surface: w.to_string(),
                    prior_logprob: prior,
                    distance: levenshtein(&observed, w),
                })
                .collect();
            (candidates, observed)
        })
}

fn mode() -> impl Strategy<Value = DistanceMode> {
    prop_oneof![Just(DistanceMode::Raw), Just(DistanceMode::Normalized)]
}

proptest! {
    #[test]
    fn posterior_sums_to_one((cands, _) in candidate_set(), lambda in 0.0f64..1e4, m in mode()) {
        let params = NoiseParams { lambda, distance_mode: m, ..NoiseParams::default() };
        let total: f64 = log_posterior(&cands, &params).unwrap().iter().map(|l| l.exp()).sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn posterior_ignores_prior_shift((cands, _) in candidate_set(), lambda in 0.0f64..50.0, shift in -100.0f64..100.0) {
        let params = NoiseParams::with_lambda(lambda);
        let base = log_posterior(&cands, &params).unwrap();
        let shifted: Vec<Candidate> = cands
            .iter()
            .map(|c| Candidate { prior_logprob: c.prior_logprob + shift, ..c.clone() })
            .collect();
        for (a, b) in base.iter().zip(log_posterior(&shifted, &params).unwrap()) {
            prop_assert!((a.exp() - b.exp()).abs() <= 1e-12);
        }
    }

    #[test]
    fn posterior_matches_direct_normalization((cands, _) in candidate_set(), lambda in 0.0f64..20.0, m in mode()) {
        let params = NoiseParams { lambda, distance_mode: m, ..NoiseParams::default() };
        let d = |c: &Candidate| match m {
            DistanceMode::Raw => c.distance.raw as f64,
            DistanceMode::Normalized => c.distance.normalized,
        };
        let weights: Vec<f64> = cands.iter().map(|c| c.prior_logprob.exp() * (-lambda * d(c)).exp()).collect();
        let z: f64 = weights.iter().sum();
        prop_assume!(z > 1e-250);
        for (lp, w) in log_posterior(&cands, &params).unwrap().iter().zip(&weights) {
            prop_assert!((lp.exp() - w / z).abs() <= 1e-12);
        }
    }

    #[test]
    fn veridical_mass_rises_with_lambda((cands, observed) in candidate_set(), l1 in 0.0f64..100.0, dl in 0.0f64..100.0, m in mode()) {
        let at = |lambda: f64| {
            let params = NoiseParams { lambda, distance_mode: m, ..NoiseParams::default() };
            posterior(&cands, &observed, &params).unwrap().veridical_prob()
        };
        prop_assert!(at(l1 + dl) >= at(l1));
    }

    #[test]
    fn effect_sizes_ignore_row_order(seed in any::<u64>(), perm in Just(()).prop_perturb(|_, mut rng| {
        let mut order: Vec<usize> = (0..12).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        order
    })) {
        let conditions = [Condition::Control, Condition::Sem, Condition::SemCrit];
        let decomps: Vec<_> = (0..12)
            .map(|i| {
                let s = ((seed.wrapping_mul(i as u64 + 7) % 997) as f64) / 50.0;
                let a = s * (((i * 31) % 7) as f64 / 7.0);
                surprisal_split::decomposition::Decomposition {
                    item_id: (i / 3).to_string(),
                    condition: conditions[i % 3].clone(),
                    lambda: 1.0,
                    surprisal_s: s,
                    heuristic_a: a,
                    discrepancy_b: s - a,
                    posterior_entropy: 0.0,
                    veridical_posterior: 1.0,
                    veridical_rank: Some(0),
                    n_candidates: 1,
                    map_word: "w".into(),
                }
            })
            .collect();
        let permuted: Vec<_> = perm.iter().map(|&i| decomps[i].clone()).collect();
        prop_assert_eq!(effect_sizes(&decomps).unwrap(), effect_sizes(&permuted).unwrap());
        prop_assert_eq!(summarize(&decomps), summarize(&permuted));
    }
}

fn corpus_and_sentence() -> impl Strategy<Value = (Vec<String>, Vec<String>, usize)> {
    let vocab = ["the", "a", "dog", "cat", "dot", "sat", "saw", "mat", "cart", "at"];
    let sentence = proptest::collection::vec(proptest::sample::select(vocab.to_vec()), 2..8);
    (
        proptest::collection::vec(sentence.clone(), 1..6),
        sentence,
        any::<proptest::sample::Index>(),
    )
        .prop_map(|(corpus, words, idx)| {
            let corpus = corpus.iter().map(|s| s.join(" ")).collect();
            let words: Vec<String> = words.iter().map(|w| w.to_string()).collect();
            let index = idx.index(words.len());
            (corpus, words, index)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ngram_conditionals_are_normalized((corpus, words, index) in corpus_and_sentence(), order in 1usize..4, alpha in 0.01f64..2.0) {
        let lm = NgramScorer::train(&corpus, order, alpha).unwrap();
        let context = &words[..index];
        let total: f64 = lm
            .vocabulary()
            .map(|w| lm.conditional_logprob(context, w).unwrap().exp())
            .sum::<f64>()
            + lm.unknown_logprob(context).exp();
        prop_assert!((total - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn decomposition_identity_and_bounds((corpus, words, index) in corpus_and_sentence(), lambda in 0.0f64..50.0) {
        let lm = NgramScorer::train(&corpus, 3, 0.1).unwrap();
        let stimulus = Stimulus::new("1", Condition::Control, words.join(" "), index, None).unwrap();
        let params = NoiseParams::with_lambda(lambda);
        let scored = score_item(&stimulus, &lm, &params).unwrap();
        let d = scored.decompose(&params).unwrap();
        prop_assert!((d.heuristic_a + d.discrepancy_b - d.surprisal_s).abs() <= 1e-9);
        // A is a posterior average of candidate surprisals
        let lo = scored.candidates.iter().map(|c| c.surprisal).fold(f64::INFINITY, f64::min);
        let hi = scored.candidates.iter().map(|c| c.surprisal).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(d.heuristic_a >= lo - 1e-9 && d.heuristic_a <= hi + 1e-9);
        prop_assert!((d.discrepancy_b - scored.discrepancy_expectation(&params).unwrap()).abs() <= 1e-9);
    }
}
