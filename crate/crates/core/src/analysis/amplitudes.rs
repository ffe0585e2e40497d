use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::experiment::Condition;
use crate::report::{csv_string, format_sig, ReportError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeRecord {
    pub item_id: String,
    pub subject_id: String,
    pub condition: Condition,
    /// Mean amplitude over the N400 window, as supplied.
    pub n400_amp: f64,
    /// Mean amplitude over the P600 window, as supplied.
    pub p600_amp: f64,
}

const COLUMNS: [&str; 5] = ["item_id", "subject_id", "condition", "n400_amp", "p600_amp"];

/// Reads the amplitudes CSV (`item_id,subject_id,condition,n400_amp,p600_amp`).
pub fn load_amplitudes(path: &Path) -> Result<Vec<AmplitudeRecord>, AnalysisError> {
    let bytes = fs::read(path).map_err(|source| AnalysisError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let schema = |row: Option<u64>, message: String| AnalysisError::Schema {
        path: path.to_path_buf(),
        row,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let headers = reader
        .headers()
        .map_err(|e| schema(Some(1), e.to_string()))?
        .clone();
    let mut positions = [0usize; 5];
    for (slot, name) in positions.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| schema(Some(1), format!("missing column {name:?}")))?;
    }

    let mut records = Vec::new();
    let mut seen: HashMap<(String, String, Condition), u64> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| schema(e.position().map(|p| p.line()), e.to_string()))?;
        let row = record.position().map_or(0, |p| p.line());
        let get = |i: usize| record.get(positions[i]).unwrap_or("");
        let amp = |i: usize| -> Result<f64, AnalysisError> {
            get(i)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| schema(Some(row), format!("{} {:?} is not a number", COLUMNS[i], get(i))))
        };
        let item_id = get(0).to_string();
        let subject_id = get(1).to_string();
        if item_id.is_empty() || subject_id.is_empty() {
            return Err(schema(Some(row), "empty item_id or subject_id".into()));
        }
        let condition = Condition::parse(get(2));
        let parsed = AmplitudeRecord {
            n400_amp: amp(3)?,
            p600_amp: amp(4)?,
            item_id,
            subject_id,
            condition,
        };
        let key = (parsed.item_id.clone(), parsed.subject_id.clone(), parsed.condition.clone());
        if let Some(first_row) = seen.insert(key, row) {
            return Err(AnalysisError::DuplicateRecord {
                item_id: parsed.item_id,
                subject_id: parsed.subject_id,
                condition: parsed.condition.to_string(),
                row,
                first_row,
            });
        }
        records.push(parsed);
    }
    if records.is_empty() {
        return Err(AnalysisError::EmptyAmplitudes(path.to_path_buf()));
    }
    Ok(records)
}

pub fn amplitudes_csv(records: &[AmplitudeRecord]) -> String {
    csv_string(
        &COLUMNS,
        records.iter().map(|r| {
            vec![
                r.item_id.clone(),
                r.subject_id.clone(),
                r.condition.to_string(),
                format_sig(r.n400_amp),
                format_sig(r.p600_amp),
            ]
        }),
    )
}

pub fn write_amplitudes(records: &[AmplitudeRecord], path: &Path) -> Result<(), AnalysisError> {
    fs::write(path, amplitudes_csv(records)).map_err(|source| {
        AnalysisError::Report(ReportError::Write {
            path: path.to_path_buf(),
            source,
        })
    })
}
