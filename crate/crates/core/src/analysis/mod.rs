//! Relating the predictors A, B and S to per-trial ERP amplitudes with
//! ordinary least squares.
//!
//! This is a fixed-effects simple regression, not a mixed-effects model;
//! reports say so. Amplitude signs pass through untouched.

mod amplitudes;
mod ols;
pub mod synth;

use std::collections::HashMap;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::decomposition::Decomposition;
use crate::experiment::{compare_item_ids, Condition};
use crate::report::{
    csv_string, format_opt, format_sig, json_num, json_opt, pretty, Provenance, Report,
    ReportError,
};

pub use amplitudes::{amplitudes_csv, load_amplitudes, write_amplitudes, AmplitudeRecord};
pub use ols::{fit_ols, OlsFit};

/// Label carried by every fit report.
pub const METHOD: &str = "OLS (not LMM)";

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
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
    #[error("duplicate amplitude record (item {item_id}, subject {subject_id}, condition {condition}) at row {row} (first seen at row {first_row})")]
    DuplicateRecord {
        item_id: String,
        subject_id: String,
        condition: String,
        row: u64,
        first_row: u64,
    },
    #[error("no amplitude records in {}", .0.display())]
    EmptyAmplitudes(PathBuf),
    #[error("regression needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("predictor has zero variance")]
    DegeneratePredictor,
    #[error("response has zero variance and cannot be standardized")]
    DegenerateResponse,
    #[error("no amplitude record matches a decomposition ({unmatched} unmatched record(s))")]
    EmptyJoin { unmatched: usize },
    #[error("{predictor} -> {response}: {source}")]
    Fit {
        predictor: Predictor,
        response: Response,
        #[source]
        source: Box<AnalysisError>,
    },
    #[error("invalid synthesis settings: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Report(#[from] ReportError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Predictor {
    A,
    B,
    S,
}

impl Predictor {
    pub fn value(self, d: &Decomposition) -> f64 {
        match self {
            Predictor::A => d.heuristic_a,
            Predictor::B => d.discrepancy_b,
            Predictor::S => d.surprisal_s,
        }
    }
}

impl std::fmt::Display for Predictor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Predictor::A => "A",
            Predictor::B => "B",
            Predictor::S => "S",
        })
    }
}

impl FromStr for Predictor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(Predictor::A),
            "B" | "b" => Ok(Predictor::B),
            "S" | "s" => Ok(Predictor::S),
            other => Err(format!("unknown predictor {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Response {
    N400,
    P600,
}

impl Response {
    pub fn value(self, r: &AmplitudeRecord) -> f64 {
        match self {
            Response::N400 => r.n400_amp,
            Response::P600 => r.p600_amp,
        }
    }

    fn note(self) -> &'static str {
        match self {
            Response::N400 => "negative slope: larger predictor, more negative N400 amplitude (the standard N400 effect)",
            Response::P600 => "positive slope: larger predictor, more positive P600 amplitude",
        }
    }
}

impl std::fmt::Display for Response {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Response::N400 => "N400",
            Response::P600 => "P600",
        })
    }
}

impl FromStr for Response {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "n400" => Ok(Response::N400),
            "p600" => Ok(Response::P600),
            other => Err(format!("unknown response {other:?}")),
        }
    }
}

/// The regression cells compared in the analysis.
pub const FIT_CELLS: [(Predictor, Response); 4] = [
    (Predictor::A, Response::N400),
    (Predictor::S, Response::N400),
    (Predictor::B, Response::P600),
    (Predictor::S, Response::P600),
];

#[derive(Debug, Clone, PartialEq)]
pub struct JoinedPairs {
    pub pairs: Vec<(f64, f64)>,
    pub n_unmatched: usize,
}

/// One (predictor, amplitude) pair per amplitude record whose item and
/// condition have a decomposition, in record order. With `item_means`,
/// amplitudes are first averaged per (item, condition) and pairs come in
/// item order.
pub fn predictor_join(
    decompositions: &[Decomposition],
    amplitudes: &[AmplitudeRecord],
    response: Response,
    predictor: Predictor,
    item_means: bool,
) -> Result<JoinedPairs, AnalysisError> {
    let index: HashMap<(&str, &Condition), &Decomposition> = decompositions
        .iter()
        .map(|d| ((d.item_id.as_str(), &d.condition), d))
        .collect();

    let mut pairs = Vec::new();
    let mut n_unmatched = 0;
    let mut cells: Vec<(&Decomposition, f64, usize)> = Vec::new();
    let mut cell_index: HashMap<(&str, &Condition), usize> = HashMap::new();
    for record in amplitudes {
        let Some(d) = index.get(&(record.item_id.as_str(), &record.condition)) else {
            n_unmatched += 1;
            continue;
        };
        let y = response.value(record);
        if item_means {
            let key = (d.item_id.as_str(), &d.condition);
            let slot = *cell_index.entry(key).or_insert_with(|| {
                cells.push((d, 0.0, 0));
                cells.len() - 1
            });
            cells[slot].1 += y;
            cells[slot].2 += 1;
        } else {
            pairs.push((predictor.value(d), y));
        }
    }
    if item_means {
        cells.sort_by(|x, y| {
            compare_item_ids(&x.0.item_id, &y.0.item_id).then_with(|| x.0.condition.cmp(&y.0.condition))
        });
        pairs = cells
            .iter()
            .map(|(d, sum, n)| (predictor.value(d), sum / *n as f64))
            .collect();
    }
    if pairs.is_empty() {
        return Err(AnalysisError::EmptyJoin { unmatched: n_unmatched });
    }
    Ok(JoinedPairs { pairs, n_unmatched })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub predictor: Predictor,
    pub response: Response,
    #[serde(flatten)]
    pub fit: OlsFit,
    pub n_unmatched: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FitOptions {
    pub standardize: bool,
    pub item_means: bool,
}

pub fn fit_predictor(
    decompositions: &[Decomposition],
    amplitudes: &[AmplitudeRecord],
    predictor: Predictor,
    response: Response,
    options: FitOptions,
) -> Result<RegressionFit, AnalysisError> {
    let wrap = |source: AnalysisError| AnalysisError::Fit {
        predictor,
        response,
        source: Box::new(source),
    };
    let joined = predictor_join(decompositions, amplitudes, response, predictor, options.item_means)
        .map_err(wrap)?;
    let fit = fit_ols(&joined.pairs, options.standardize).map_err(wrap)?;
    Ok(RegressionFit {
        predictor,
        response,
        fit,
        n_unmatched: joined.n_unmatched,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub provenance: Provenance,
    pub item_means: bool,
    pub fits: Vec<RegressionFit>,
}

/// Fits every cell of [`FIT_CELLS`].
pub fn fit_table(
    decompositions: &[Decomposition],
    amplitudes: &[AmplitudeRecord],
    options: FitOptions,
    provenance: Provenance,
) -> Result<FitReport, AnalysisError> {
    let fits = FIT_CELLS
        .iter()
        .map(|&(p, r)| fit_predictor(decompositions, amplitudes, p, r, options))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FitReport {
        provenance,
        item_means: options.item_means,
        fits,
    })
}

impl FitReport {
    pub fn fit(&self, predictor: Predictor, response: Response) -> Option<&RegressionFit> {
        self.fits
            .iter()
            .find(|f| f.predictor == predictor && f.response == response)
    }
}

const FIT_HEADER: [&str; 12] = [
    "predictor",
    "response",
    "slope",
    "intercept",
    "std_error",
    "t_stat",
    "n",
    "df",
    "r_squared",
    "standardized",
    "n_unmatched",
    "method",
];

impl Report for FitReport {
    fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    fn to_csv(&self) -> String {
        csv_string(
            &FIT_HEADER,
            self.fits.iter().map(|f| {
                vec![
                    f.predictor.to_string(),
                    f.response.to_string(),
                    format_sig(f.fit.slope),
                    format_sig(f.fit.intercept),
                    format_sig(f.fit.std_error),
                    format_opt(f.fit.t_stat),
                    f.fit.n.to_string(),
                    f.fit.df.to_string(),
                    format_opt(f.fit.r_squared),
                    f.fit.standardized.to_string(),
                    f.n_unmatched.to_string(),
                    METHOD.to_string(),
                ]
            }),
        )
    }

    fn to_json(&self) -> String {
        let fits: Vec<_> = self
            .fits
            .iter()
            .map(|f| {
                json!({
                    "predictor": f.predictor.to_string(),
                    "response": f.response.to_string(),
                    "slope": json_num(f.fit.slope),
                    "intercept": json_num(f.fit.intercept),
                    "std_error": json_num(f.fit.std_error),
                    "t_stat": json_opt(f.fit.t_stat),
                    "n": f.fit.n,
                    "df": f.fit.df,
                    "r_squared": json_opt(f.fit.r_squared),
                    "standardized": f.fit.standardized,
                    "n_unmatched": f.n_unmatched,
                    "note": f.response.note(),
                })
            })
            .collect();
        pretty(&json!({
            "provenance": serde_json::to_value(&self.provenance).expect("provenance serializes"),
            "method": METHOD,
            "item_means": self.item_means,
            "fits": fits,
        }))
    }
}
