//! Condition-level simulation over a stimulus set.
//!
//! Stimuli are evaluated in a canonical order (item id, then condition) so
//! that aggregates do not depend on file order or on how many workers were
//! used. Effects are differences to the Control stimulus of the same item,
//! averaged over items, with by-item standard errors.

mod reports;
mod stimulus;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::decomposition::{score_item, Decomposition, DecompositionError, ScoredItem};
use crate::noisy_channel::{NoiseParams, NoisyChannelError};
use crate::report::{Provenance, ReportError};
use crate::scorer::{Scorer, ScorerError};

pub use reports::{load_decomposition_report, ComparisonTable, DecompositionReport};
pub use stimulus::{check_item_sets, load_stimuli, Condition, Stimulus};

/// Large-lambda endpoint added to sweeps on request.
pub const LARGE_LAMBDA: f64 = 1e6;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}{}: {message}", path.display(), row.map(|r| format!(" row {r}")).unwrap_or_default())]
    Schema {
        path: PathBuf,
        row: Option<u64>,
        message: String,
    },
    #[error("no stimuli in {}", .0.display())]
    EmptyStimuli(PathBuf),
    #[error("item {item_id} ({condition}): target index {index} out of range for a {len}-word sentence")]
    TargetOutOfRange {
        item_id: String,
        condition: String,
        index: usize,
        len: usize,
    },
    #[error("duplicate stimulus for item {item_id}, condition {condition} at row {row} (first seen at row {first_row})")]
    DuplicateStimulus {
        item_id: String,
        condition: String,
        row: u64,
        first_row: u64,
    },
    #[error("no Control stimulus for item(s): {}", .0.join(", "))]
    MissingControl(Vec<String>),
    #[error("{} item(s) failed:\n{}", .0.len(), list_errors(.0))]
    Items(Vec<DecompositionError>),
    #[error("invalid lambda grid: {0}")]
    InvalidLambdas(String),
    #[error(transparent)]
    Params(NoisyChannelError),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Report(#[from] ReportError),
}

fn list_errors(errors: &[DecompositionError]) -> String {
    errors
        .iter()
        .map(|e| format!("  {e}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl ExperimentError {
    /// True when at least one item failed because the scorer could not be
    /// reached or answered out of protocol.
    pub fn is_scorer_failure(&self) -> bool {
        match self {
            ExperimentError::Items(errors) => errors.iter().any(|e| {
                matches!(
                    e.source,
                    NoisyChannelError::Scorer(ScorerError::Unavailable(_) | ScorerError::Protocol(_))
                )
            }),
            _ => false,
        }
    }
}

/// Condition means of one set of decompositions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: Condition,
    pub mean_a: f64,
    pub mean_b: f64,
    pub mean_s: f64,
    /// By-item standard errors; absent with fewer than two items.
    pub se_a: Option<f64>,
    pub se_b: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemDiff {
    pub item_id: String,
    pub a_diff: f64,
    pub b_diff: f64,
    pub s_diff: f64,
}

/// Mean difference to Control for one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionEffect {
    pub condition: Condition,
    pub mean_a_diff: f64,
    pub mean_b_diff: f64,
    pub mean_s_diff: f64,
    pub se_a_diff: Option<f64>,
    pub se_b_diff: Option<f64>,
    pub n_items: usize,
    pub items: Vec<ItemDiff>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectSizes {
    pub provenance: Provenance,
    pub lambda: f64,
    pub summaries: Vec<ConditionSummary>,
    pub effects: Vec<ConditionEffect>,
}

impl EffectSizes {
    pub fn effect(&self, condition: &Condition) -> Option<&ConditionEffect> {
        self.effects.iter().find(|e| &e.condition == condition)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    #[serde(flatten)]
    pub summary: ConditionSummary,
}

/// Condition-averaged A and B for each lambda of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub provenance: Provenance,
    /// Ordered by lambda (grid order), then condition.
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn lambdas(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for row in &self.rows {
            if out.last() != Some(&row.lambda) {
                out.push(row.lambda);
            }
        }
        out
    }

    pub fn row(&self, lambda: f64, condition: &Condition) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.lambda == lambda && &r.summary.condition == condition)
    }
}

/// Numeric item ids compare numerically, everything else lexically.
pub fn compare_item_ids(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        _ => a.cmp(b),
    }
}

fn canonical(stimuli: &[Stimulus]) -> Vec<&Stimulus> {
    let mut sorted: Vec<&Stimulus> = stimuli.iter().collect();
    sorted.sort_by(|a, b| {
        compare_item_ids(&a.item_id, &b.item_id).then_with(|| a.condition.cmp(&b.condition))
    });
    sorted
}

fn par_map<T, R, F>(items: &[T], jobs: usize, f: F) -> Result<Vec<R>, ExperimentError>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if jobs <= 1 {
        return Ok(items.iter().map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;
    Ok(pool.install(|| items.par_iter().map(f).collect()))
}

fn collect_items<T>(results: Vec<Result<T, DecompositionError>>) -> Result<Vec<T>, ExperimentError> {
    let mut ok = Vec::with_capacity(results.len());
    let mut failed = Vec::new();
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => failed.push(e),
        }
    }
    if failed.is_empty() {
        Ok(ok)
    } else {
        Err(ExperimentError::Items(failed))
    }
}

/// Runs every model query for `stimuli`, in canonical order. Failures are
/// collected rather than stopping at the first one.
pub fn score_stimuli(
    stimuli: &[Stimulus],
    scorer: &dyn Scorer,
    params: &NoiseParams,
    jobs: usize,
) -> Result<Vec<ScoredItem>, ExperimentError> {
    params.validate().map_err(ExperimentError::Params)?;
    let ordered = canonical(stimuli);
    let results = par_map(&ordered, jobs, |s| score_item(s, scorer, params))?;
    collect_items(results)
}

pub fn decompose_scored(
    scored: &[ScoredItem],
    params: &NoiseParams,
) -> Result<Vec<Decomposition>, ExperimentError> {
    params.validate().map_err(ExperimentError::Params)?;
    collect_items(scored.iter().map(|item| item.decompose(params)).collect())
}

/// Per-stimulus decompositions at `params.lambda`, in canonical order.
pub fn decompose_all(
    stimuli: &[Stimulus],
    scorer: &dyn Scorer,
    params: &NoiseParams,
    jobs: usize,
) -> Result<Vec<Decomposition>, ExperimentError> {
    decompose_scored(&score_stimuli(stimuli, scorer, params, jobs)?, params)
}

fn mean_and_se(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

fn sorted_by_item<'a>(rows: impl IntoIterator<Item = &'a Decomposition>) -> Vec<&'a Decomposition> {
    let mut rows: Vec<&Decomposition> = rows.into_iter().collect();
    rows.sort_by(|a, b| compare_item_ids(&a.item_id, &b.item_id));
    rows
}

/// Condition means of A, B and S with by-item standard errors.
pub fn summarize(decompositions: &[Decomposition]) -> Vec<ConditionSummary> {
    let mut by_condition: BTreeMap<&Condition, Vec<&Decomposition>> = BTreeMap::new();
    for d in decompositions {
        by_condition.entry(&d.condition).or_default().push(d);
    }
    by_condition
        .into_iter()
        .map(|(condition, rows)| {
            let rows = sorted_by_item(rows);
            let a: Vec<f64> = rows.iter().map(|d| d.heuristic_a).collect();
            let b: Vec<f64> = rows.iter().map(|d| d.discrepancy_b).collect();
            let s: Vec<f64> = rows.iter().map(|d| d.surprisal_s).collect();
            let (mean_a, se_a) = mean_and_se(&a);
            let (mean_b, se_b) = mean_and_se(&b);
            let (mean_s, _) = mean_and_se(&s);
            ConditionSummary {
                condition: condition.clone(),
                mean_a,
                mean_b,
                mean_s,
                se_a,
                se_b,
                n: rows.len(),
            }
        })
        .collect()
}

fn items_missing_control<'a>(
    entries: impl IntoIterator<Item = (&'a str, &'a Condition)>,
) -> Vec<String> {
    let mut with_control = BTreeSet::new();
    let mut needing = BTreeSet::new();
    for (item, condition) in entries {
        if condition.is_control() {
            with_control.insert(item);
        } else {
            needing.insert(item);
        }
    }
    let mut missing: Vec<String> = needing
        .difference(&with_control)
        .map(|s| s.to_string())
        .collect();
    missing.sort_by(|a, b| compare_item_ids(a, b));
    missing
}

/// Differences to Control per condition, averaged over items.
pub fn effect_sizes(decompositions: &[Decomposition]) -> Result<Vec<ConditionEffect>, ExperimentError> {
    let missing = items_missing_control(
        decompositions
            .iter()
            .map(|d| (d.item_id.as_str(), &d.condition)),
    );
    if !missing.is_empty() {
        return Err(ExperimentError::MissingControl(missing));
    }

    let controls: BTreeMap<&str, &Decomposition> = decompositions
        .iter()
        .filter(|d| d.condition.is_control())
        .map(|d| (d.item_id.as_str(), d))
        .collect();
    let mut by_condition: BTreeMap<&Condition, Vec<&Decomposition>> = BTreeMap::new();
    for d in decompositions.iter().filter(|d| !d.condition.is_control()) {
        by_condition.entry(&d.condition).or_default().push(d);
    }

    Ok(by_condition
        .into_iter()
        .map(|(condition, rows)| {
            let items: Vec<ItemDiff> = sorted_by_item(rows)
                .into_iter()
                .map(|d| {
                    let control = controls[d.item_id.as_str()];
                    ItemDiff {
                        item_id: d.item_id.clone(),
                        a_diff: d.heuristic_a - control.heuristic_a,
                        b_diff: d.discrepancy_b - control.discrepancy_b,
                        s_diff: d.surprisal_s - control.surprisal_s,
                    }
                })
                .collect();
            let a: Vec<f64> = items.iter().map(|i| i.a_diff).collect();
            let b: Vec<f64> = items.iter().map(|i| i.b_diff).collect();
            let s: Vec<f64> = items.iter().map(|i| i.s_diff).collect();
            let (mean_a_diff, se_a_diff) = mean_and_se(&a);
            let (mean_b_diff, se_b_diff) = mean_and_se(&b);
            let (mean_s_diff, _) = mean_and_se(&s);
            ConditionEffect {
                condition: condition.clone(),
                mean_a_diff,
                mean_b_diff,
                mean_s_diff,
                se_a_diff,
                se_b_diff,
                n_items: items.len(),
                items,
            }
        })
        .collect())
}

fn params_echo(params: &NoiseParams) -> serde_json::Value {
    json!({
        "distance_mode": params.distance_mode,
        "top_k": params.top_k,
        "force_include_veridical": params.force_include_veridical,
    })
}

/// Simulated effect sizes of every condition against Control.
pub fn run_condition_experiment(
    stimuli: &[Stimulus],
    scorer: &dyn Scorer,
    params: &NoiseParams,
    jobs: usize,
) -> Result<EffectSizes, ExperimentError> {
    let missing = items_missing_control(stimuli.iter().map(|s| (s.item_id.as_str(), &s.condition)));
    if !missing.is_empty() {
        return Err(ExperimentError::MissingControl(missing));
    }
    let decompositions = decompose_all(stimuli, scorer, params, jobs)?;
    let mut config = params_echo(params);
    config["lambda"] = json!(params.lambda);
    Ok(EffectSizes {
        provenance: Provenance::new(Some(scorer.descriptor()), config),
        lambda: params.lambda,
        summaries: summarize(&decompositions),
        effects: effect_sizes(&decompositions)?,
    })
}

/// Condition averages for every lambda in `lambdas`. The model is queried
/// once per stimulus; only the posterior is recomputed per lambda.
pub fn run_lambda_sweep(
    stimuli: &[Stimulus],
    scorer: &dyn Scorer,
    lambdas: &[f64],
    params: &NoiseParams,
    jobs: usize,
) -> Result<SweepReport, ExperimentError> {
    if lambdas.is_empty() {
        return Err(ExperimentError::InvalidLambdas("no lambda values given".into()));
    }
    if let Some(bad) = lambdas.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(ExperimentError::InvalidLambdas(format!(
            "lambda {bad} is not finite and non-negative"
        )));
    }
    let scored = score_stimuli(stimuli, scorer, params, jobs)?;
    let mut rows = Vec::new();
    for &lambda in lambdas {
        let at = NoiseParams { lambda, ..*params };
        let decompositions = decompose_scored(&scored, &at)?;
        rows.extend(
            summarize(&decompositions)
                .into_iter()
                .map(|summary| SweepRow { lambda, summary }),
        );
    }
    let mut config = params_echo(params);
    config["lambdas"] = json!(lambdas);
    Ok(SweepReport {
        provenance: Provenance::new(Some(scorer.descriptor()), config),
        rows,
    })
}

/// Sorted, deduplicated grid, with `0` and [`LARGE_LAMBDA`] added when
/// `with_endpoints` is set.
pub fn lambda_grid(lambdas: &[f64], with_endpoints: bool) -> Vec<f64> {
    let mut grid = lambdas.to_vec();
    if with_endpoints {
        grid.extend([0.0, LARGE_LAMBDA]);
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub condition: Condition,
    pub mean_human_cloze: Option<f64>,
    pub n_cloze: usize,
    pub mean_surprisal: f64,
    pub se_surprisal: Option<f64>,
    pub n: usize,
}

/// Mean human cloze (passed through) beside mean model surprisal, per
/// condition.
pub fn surprisal_comparison(
    stimuli: &[Stimulus],
    scorer: &dyn Scorer,
    jobs: usize,
) -> Result<ComparisonTable, ExperimentError> {
    let ordered = canonical(stimuli);
    let results = par_map(&ordered, jobs, |s| {
        scorer
            .conditional_logprob(s.context(), s.target())
            .map(|lp| (*s, -lp))
            .map_err(|e| DecompositionError {
                item_id: s.item_id.clone(),
                condition: s.condition.clone(),
                source: e.into(),
            })
    })?;
    let scored = collect_items(results)?;

    let mut by_condition: BTreeMap<&Condition, Vec<(&Stimulus, f64)>> = BTreeMap::new();
    for (s, surprisal) in scored {
        by_condition.entry(&s.condition).or_default().push((s, surprisal));
    }
    let rows = by_condition
        .into_iter()
        .map(|(condition, entries)| {
            let surprisals: Vec<f64> = entries.iter().map(|(_, v)| *v).collect();
            let cloze: Vec<f64> = entries.iter().filter_map(|(s, _)| s.human_cloze).collect();
            let (mean_surprisal, se_surprisal) = mean_and_se(&surprisals);
            ComparisonRow {
                condition: condition.clone(),
                mean_human_cloze: (!cloze.is_empty()).then(|| mean_and_se(&cloze).0),
                n_cloze: cloze.len(),
                mean_surprisal,
                se_surprisal,
                n: entries.len(),
            }
        })
        .collect();
    Ok(ComparisonTable {
        provenance: Provenance::new(Some(scorer.descriptor()), json!({})),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    #[serde(rename = "A")]
    HeuristicSurprise,
    #[serde(rename = "B")]
    DiscrepancySignal,
}

/// Whether one condition's sweep curve moves in the expected direction:
/// A non-decreasing and B non-increasing in lambda.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendCheck {
    pub condition: Condition,
    pub quantity: Quantity,
    pub reversals: usize,
    pub largest_reversal: f64,
    pub pass: bool,
}

/// Steps against the expected direction smaller than this are rounding.
const TREND_EPSILON: f64 = 1e-12;

/// Checks the sweep trend per condition, allowing up to `max_reversals`
/// steps against the expected direction, each no larger than `tolerance`
/// nats.
pub fn check_sweep_trend(report: &SweepReport, tolerance: f64, max_reversals: usize) -> Vec<TrendCheck> {
    let mut curves: BTreeMap<&Condition, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for row in &report.rows {
        curves
            .entry(&row.summary.condition)
            .or_default()
            .push((row.lambda, row.summary.mean_a, row.summary.mean_b));
    }
    let mut checks = Vec::new();
    for (condition, mut points) in curves {
        points.sort_by(|x, y| x.0.total_cmp(&y.0));
        for quantity in [Quantity::HeuristicSurprise, Quantity::DiscrepancySignal] {
            let steps: Vec<f64> = points
                .windows(2)
                .map(|w| match quantity {
                    // positive = step against the expected direction
                    Quantity::HeuristicSurprise => w[0].1 - w[1].1,
                    Quantity::DiscrepancySignal => w[1].2 - w[0].2,
                })
                .filter(|&against| against > TREND_EPSILON)
                .collect();
            let largest = steps.iter().copied().fold(0.0, f64::max);
            checks.push(TrendCheck {
                condition: condition.clone(),
                quantity,
                reversals: steps.len(),
                largest_reversal: largest,
                pass: steps.len() <= max_reversals && largest <= tolerance,
            });
        }
    }
    checks
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(item: &str, condition: Condition, s: f64, a: f64) -> Decomposition {
        Decomposition {
            item_id: item.into(),
            condition,
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
    }

    #[test]
    fn item_id_order() {
        let mut ids = vec!["10", "2", "b", "a", "1"];
        ids.sort_by(|a, b| compare_item_ids(a, b));
        assert_eq!(ids, vec!["1", "2", "10", "a", "b"]);
    }

    #[test]
    fn effects_by_hand() {
        let rows = vec![
            d("1", Condition::Control, 5.0, 4.0),
            d("1", Condition::Sem, 9.0, 8.0),
            d("2", Condition::Control, 4.0, 4.0),
            d("2", Condition::Sem, 8.0, 5.0),
        ];
        let effects = effect_sizes(&rows).unwrap();
        assert_eq!(effects.len(), 1);
        let sem = &effects[0];
        // A diffs 4 and 1, B diffs 0 and 3
        assert_eq!(sem.mean_a_diff, 2.5);
        assert_eq!(sem.mean_b_diff, 1.5);
        assert_eq!(sem.mean_s_diff, 4.0);
        assert!((sem.se_a_diff.unwrap() - 1.5).abs() < 1e-12);
        assert_eq!(sem.n_items, 2);
    }

    #[test]
    fn missing_control_lists_items() {
        let rows = vec![
            d("1", Condition::Control, 5.0, 4.0),
            d("3", Condition::Sem, 9.0, 8.0),
            d("2", Condition::Synt, 9.0, 8.0),
        ];
        match effect_sizes(&rows) {
            Err(ExperimentError::MissingControl(items)) => assert_eq!(items, vec!["2", "3"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn summary_keeps_identity() {
        let rows = vec![
            d("1", Condition::Sem, 9.1, 8.3),
            d("2", Condition::Sem, 7.7, 2.9),
            d("3", Condition::Sem, 1.3, 0.4),
        ];
        let summary = &summarize(&rows)[0];
        assert!((summary.mean_a + summary.mean_b - summary.mean_s).abs() <= 1e-9);
        assert_eq!(summary.n, 3);
        assert!(summarize(&rows[..1])[0].se_a.is_none());
    }

    #[test]
    fn grid_with_endpoints() {
        assert_eq!(
            lambda_grid(&[8.0, 1.0, 2.0, 4.0, 0.0], true),
            vec![0.0, 1.0, 2.0, 4.0, 8.0, 1e6]
        );
        assert_eq!(lambda_grid(&[3.0], false), vec![3.0]);
    }

    fn sweep(points: &[(f64, f64, f64)]) -> SweepReport {
        SweepReport {
            provenance: Provenance::new(None, json!({})),
            rows: points
                .iter()
                .map(|&(lambda, a, b)| SweepRow {
                    lambda,
                    summary: ConditionSummary {
                        condition: Condition::Sem,
                        mean_a: a,
                        mean_b: b,
                        mean_s: a + b,
                        se_a: None,
                        se_b: None,
                        n: 1,
                    },
                })
                .collect(),
        }
    }

    #[test]
    fn trend_allows_one_small_reversal() {
        let ok = sweep(&[(0.0, 4.0, 4.0), (1.0, 5.0, 3.0), (2.0, 4.95, 2.0), (3.0, 6.0, 1.0)]);
        assert!(check_sweep_trend(&ok, 0.1, 1).iter().all(|c| c.pass));

        let two = sweep(&[(0.0, 4.0, 4.0), (1.0, 3.95, 3.0), (2.0, 3.9, 2.0)]);
        let checks = check_sweep_trend(&two, 0.1, 1);
        assert!(!checks[0].pass);
        assert_eq!(checks[0].reversals, 2);
        assert!(checks[1].pass);

        let big = sweep(&[(0.0, 4.0, 1.0), (1.0, 5.0, 2.0)]);
        let checks = check_sweep_trend(&big, 0.1, 1);
        assert!(checks[0].pass);
        assert!(!checks[1].pass);
    }
}
