//! Seeded synthetic amplitudes: noisy linear functions of A (N400) and B
//! (P600). Used to check that a fit recovers known slopes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{AmplitudeRecord, AnalysisError};
use crate::decomposition::Decomposition;
use crate::experiment::compare_item_ids;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub subjects: usize,
    pub n400_intercept: f64,
    /// N400 change per nat of A.
    pub n400_slope: f64,
    pub p600_intercept: f64,
    /// P600 change per nat of B.
    pub p600_slope: f64,
    /// Standard deviation of the Gaussian trial noise.
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            subjects: 20,
            n400_intercept: 0.0,
            n400_slope: -0.5,
            p600_intercept: 0.0,
            p600_slope: 0.5,
            noise_sd: 1.0,
            seed: 0,
        }
    }
}

/// One record per subject and decomposition. The output depends only on
/// the decompositions (in any order) and `spec`.
pub fn synthesize_amplitudes(
    decompositions: &[Decomposition],
    spec: &SynthSpec,
) -> Result<Vec<AmplitudeRecord>, AnalysisError> {
    if spec.subjects == 0 {
        return Err(AnalysisError::InvalidSpec("subjects must be at least 1".into()));
    }
    let params = [spec.n400_intercept, spec.n400_slope, spec.p600_intercept, spec.p600_slope];
    if params.iter().any(|v| !v.is_finite()) {
        return Err(AnalysisError::InvalidSpec("intercepts and slopes must be finite".into()));
    }
    let noise = Some(spec.noise_sd)
        .filter(|sd| sd.is_finite() && *sd >= 0.0)
        .and_then(|sd| Normal::new(0.0, sd).ok())
        .ok_or_else(|| AnalysisError::InvalidSpec(format!("noise_sd {} must be finite and non-negative", spec.noise_sd)))?;

    let mut ordered: Vec<&Decomposition> = decompositions.iter().collect();
    ordered.sort_by(|a, b| {
        compare_item_ids(&a.item_id, &b.item_id).then_with(|| a.condition.cmp(&b.condition))
    });

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut records = Vec::with_capacity(ordered.len() * spec.subjects);
    for subject in 1..=spec.subjects {
        for d in &ordered {
            let n400 = spec.n400_intercept + spec.n400_slope * d.heuristic_a + noise.sample(&mut rng);
            let p600 = spec.p600_intercept + spec.p600_slope * d.discrepancy_b + noise.sample(&mut rng);
            records.push(AmplitudeRecord {
                item_id: d.item_id.clone(),
                subject_id: format!("s{subject}"),
                condition: d.condition.clone(),
                n400_amp: n400,
                p600_amp: p600,
            });
        }
    }
    Ok(records)
}
