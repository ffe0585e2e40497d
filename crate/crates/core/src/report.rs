//! Deterministic report emission.
//!
//! Every report renders to CSV or JSON with a fixed column order, numbers at
//! six significant digits (C `%g` style) and LF line endings, so identical
//! inputs give byte-identical files. JSON reports embed their
//! [`Provenance`]; CSV reports keep the header on the first line and write
//! the provenance to a `<file>.provenance.json` sidecar.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::scorer::ScorerDescriptor;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot read {}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed report: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

impl ReportFormat {
    /// `json` for a `.json` extension, CSV otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

/// Which model produced a report and under which configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub scorer: Option<ScorerDescriptor>,
    pub config: Value,
}

impl Provenance {
    pub fn new(scorer: Option<ScorerDescriptor>, config: Value) -> Self {
        Self { scorer, config }
    }
}

pub trait Report {
    fn provenance(&self) -> &Provenance;
    fn to_csv(&self) -> String;
    fn to_json(&self) -> String;

    fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Json => self.to_json(),
        }
    }
}

/// Writes `report` to `path`; for CSV also writes the provenance sidecar.
pub fn emit_report<R: Report + ?Sized>(
    report: &R,
    format: ReportFormat,
    path: &Path,
) -> Result<(), ReportError> {
    write_file(path, &report.render(format))?;
    if format == ReportFormat::Csv {
        write_file(&sidecar_path(path), &provenance_json(report.provenance()))?;
    }
    Ok(())
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".provenance.json");
    path.with_file_name(name)
}

pub fn provenance_json(provenance: &Provenance) -> String {
    pretty(&serde_json::to_value(provenance).expect("provenance serializes"))
}

fn write_file(path: &Path, contents: &str) -> Result<(), ReportError> {
    fs::write(path, contents).map_err(|source| ReportError::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn read_file(path: &Path) -> Result<String, ReportError> {
    fs::read_to_string(path).map_err(|source| ReportError::Read {
        path: path.to_path_buf(),
        source,
    })
}

/// Formats with six significant digits the way C's `%g` does: fixed notation
/// for decimal exponents in `[-4, 6)`, scientific otherwise, trailing zeros
/// removed.
pub fn format_sig(x: f64) -> String {
    const DIGITS: i32 = 6;
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exponent) = sci.split_once('e').expect("scientific format has an exponent");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    if exponent < -4 || exponent >= DIGITS {
        let sign = if exponent < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exponent.abs())
    } else {
        let decimals = (DIGITS - 1 - exponent) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

/// The value `format_sig` prints, read back.
pub fn round_sig(x: f64) -> f64 {
    if x.is_finite() {
        format_sig(x).parse().expect("format_sig output parses")
    } else {
        x
    }
}

pub(crate) fn format_opt(x: Option<f64>) -> String {
    x.map(format_sig).unwrap_or_default()
}

pub(crate) fn json_num(x: f64) -> Value {
    serde_json::Number::from_f64(round_sig(x)).map_or(Value::Null, Value::Number)
}

pub(crate) fn json_opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, json_num)
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub(crate) fn pretty(value: &Value) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("json value serializes");
    out.push('\n');
    out
}

/// Renders rows as LF-terminated CSV.
pub(crate) fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer.write_record(header).expect("in-memory write");
    for row in rows {
        writer.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

pub(crate) fn field<'a>(value: &'a Value, key: &str) -> Result<&'a Value, ReportError> {
    value
        .get(key)
        .ok_or_else(|| ReportError::Malformed(format!("missing field {key:?}")))
}

pub(crate) fn num_field(value: &Value, key: &str) -> Result<f64, ReportError> {
    field(value, key)?
        .as_f64()
        .ok_or_else(|| ReportError::Malformed(format!("field {key:?} is not a number")))
}

pub(crate) fn opt_num_field(value: &Value, key: &str) -> Result<Option<f64>, ReportError> {
    match value.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_f64()
            .map(Some)
            .ok_or_else(|| ReportError::Malformed(format!("field {key:?} is not a number"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        let cases = [
            (0.0, "0"),
            (-0.0, "0"),
            (1.0, "1"),
            (1e6, "1e+06"),
            (123456.0, "123456"),
            (1234567.0, "1.23457e+06"),
            (999999.5, "1e+06"),
            (0.0001, "0.0001"),
            (0.00001234567, "1.23457e-05"),
            (-5.2, "-5.2"),
            (3.14159265, "3.14159"),
            (0.1 + 0.2, "0.3"),
            (2.0f64.ln(), "0.693147"),
            (1e-300, "1e-300"),
            (f64::NAN, "NaN"),
        ];
        for (x, want) in cases {
            assert_eq!(format_sig(x), want, "formatting {x:e}");
        }
    }

    #[test]
    fn round_sig_is_idempotent() {
        for x in [1.0 / 3.0, 27.631021115928547, -1e-7 / 3.0, 12345678.9] {
            let once = round_sig(x);
            assert_eq!(round_sig(once), once);
            assert_eq!(format_sig(once), format_sig(x));
        }
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(
            sidecar_path(Path::new("/tmp/out/sweep.csv")),
            PathBuf::from("/tmp/out/sweep.csv.provenance.json")
        );
    }

    #[test]
    fn csv_uses_lf_and_quotes() {
        let out = csv_string(&["a", "b"], vec![vec!["1".into(), "x,y".into()]]);
        assert_eq!(out, "a,b\n1,\"x,y\"\n");
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(ReportFormat::from_path(Path::new("r.JSON")), ReportFormat::Json);
        assert_eq!(ReportFormat::from_path(Path::new("r.csv")), ReportFormat::Csv);
        assert_eq!(ReportFormat::from_path(Path::new("r")), ReportFormat::Csv);
    }
}
