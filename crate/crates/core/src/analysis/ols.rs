use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// Simple linear regression of response on predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub slope: f64,
    pub intercept: f64,
    pub std_error: f64,
    /// `slope / std_error`; absent for a perfect fit.
    pub t_stat: Option<f64>,
    pub n: usize,
    /// Residual degrees of freedom, `n - 2`.
    pub df: usize,
    /// Absent when the response is constant.
    pub r_squared: Option<f64>,
    pub standardized: bool,
}

fn mean(values: impl Iterator<Item = f64>, n: f64) -> f64 {
    values.sum::<f64>() / n
}

/// Z-scores with the sample standard deviation.
fn zscore(values: &[f64]) -> Option<Vec<f64>> {
    let n = values.len() as f64;
    let m = mean(values.iter().copied(), n);
    let sd = (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    (sd > 0.0).then(|| values.iter().map(|v| (v - m) / sd).collect())
}

/// Fits `y = intercept + slope * x`. With `standardize`, both variables are
/// z-scored first and the slope is a standardized coefficient.
pub fn fit_ols(pairs: &[(f64, f64)], standardize: bool) -> Result<OlsFit, AnalysisError> {
    let n = pairs.len();
    if n < 3 {
        return Err(AnalysisError::TooFewPoints(n));
    }
    let mut x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let nf = n as f64;

    let mx = mean(x.iter().copied(), nf);
    if x.iter().all(|v| *v == x[0]) || x.iter().map(|v| (v - mx).powi(2)).sum::<f64>() == 0.0 {
        return Err(AnalysisError::DegeneratePredictor);
    }
    if standardize {
        x = zscore(&x).ok_or(AnalysisError::DegeneratePredictor)?;
        y = zscore(&y).ok_or(AnalysisError::DegenerateResponse)?;
    }

    let mx = mean(x.iter().copied(), nf);
    let my = mean(y.iter().copied(), nf);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();

    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let df = n - 2;
    let std_error = (ssr / df as f64 / sxx).sqrt();
    Ok(OlsFit {
        slope,
        intercept,
        std_error,
        t_stat: (std_error > 0.0).then(|| slope / std_error),
        n,
        df,
        r_squared: (syy > 0.0).then(|| 1.0 - ssr / syy),
        standardized: standardize,
    })
}
