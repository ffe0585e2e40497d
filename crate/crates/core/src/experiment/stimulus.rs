use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::text::{strip_punctuation, tokenize};

/// Experimental condition of a stimulus. The four conditions of the
/// reference design get dedicated variants; any other label is kept as-is.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Condition {
    Control,
    Sem,
    SemCrit,
    Synt,
    Other(String),
}

impl Condition {
    pub fn parse(label: &str) -> Self {
        match label.trim().to_ascii_lowercase().as_str() {
            "control" => Condition::Control,
            "sem" | "semantic" => Condition::Sem,
            "semcrit" => Condition::SemCrit,
            "synt" | "syn" | "syntactic" => Condition::Synt,
            _ => Condition::Other(label.trim().to_string()),
        }
    }

    pub fn is_control(&self) -> bool {
        matches!(self, Condition::Control)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Control => f.write_str("Control"),
            Condition::Sem => f.write_str("Sem"),
            Condition::SemCrit => f.write_str("SemCrit"),
            Condition::Synt => f.write_str("Synt"),
            Condition::Other(label) => f.write_str(label),
        }
    }
}

impl From<String> for Condition {
    fn from(label: String) -> Self {
        Condition::parse(&label)
    }
}

impl From<Condition> for String {
    fn from(c: Condition) -> Self {
        c.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stimulus {
    pub item_id: String,
    pub condition: Condition,
    pub sentence: String,
    /// Whitespace tokens of `sentence`, punctuation attached.
    pub words: Vec<String>,
    /// Zero-based position of the target in `words`.
    pub target_index: usize,
    pub human_cloze: Option<f64>,
}

impl Stimulus {
    pub fn new(
        item_id: impl Into<String>,
        condition: Condition,
        sentence: impl Into<String>,
        target_index: usize,
        human_cloze: Option<f64>,
    ) -> Result<Self, ExperimentError> {
        let item_id = item_id.into();
        let sentence = sentence.into();
        let words = tokenize(&sentence);
        if target_index >= words.len() {
            return Err(ExperimentError::TargetOutOfRange {
                item_id,
                condition: condition.to_string(),
                index: target_index,
                len: words.len(),
            });
        }
        Ok(Self {
            item_id,
            condition,
            sentence,
            words,
            target_index,
            human_cloze,
        })
    }

    /// The target word with surrounding punctuation removed.
    pub fn target(&self) -> &str {
        strip_punctuation(&self.words[self.target_index])
    }

    /// Words preceding the target.
    pub fn context(&self) -> &[String] {
        &self.words[..self.target_index]
    }
}

const REQUIRED_COLUMNS: [&str; 4] = ["item_id", "condition", "sentence", "target_index"];

/// Reads the stimuli CSV (`item_id,condition,sentence,target_index[,human_cloze]`).
pub fn load_stimuli(path: &Path) -> Result<Vec<Stimulus>, ExperimentError> {
    let bytes = fs::read(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let schema = |row: Option<u64>, message: String| ExperimentError::Schema {
        path: path.to_path_buf(),
        row,
        message,
    };

    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::Headers)
        .from_reader(bytes.as_slice());
    let headers = reader
        .headers()
        .map_err(|e| schema(Some(1), e.to_string()))?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let mut positions = [0usize; 4];
    for (slot, name) in positions.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = column(name).ok_or_else(|| schema(Some(1), format!("missing column {name:?}")))?;
    }
    let [id_col, cond_col, sentence_col, index_col] = positions;
    let cloze_col = column("human_cloze");

    let mut stimuli = Vec::new();
    let mut seen: HashMap<(String, Condition), u64> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            schema(e.position().map(|p| p.line()), e.to_string())
        })?;
        let row = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("").trim();

        let item_id = field(id_col).to_string();
        if item_id.is_empty() {
            return Err(schema(Some(row), "empty item_id".into()));
        }
        let condition = Condition::parse(field(cond_col));
        let target_index: usize = field(index_col).parse().map_err(|_| {
            schema(
                Some(row),
                format!("target_index {:?} is not a non-negative integer", field(index_col)),
            )
        })?;
        let human_cloze = match cloze_col.map(field) {
            None | Some("") => None,
            Some(raw) => {
                let value: f64 = raw
                    .parse()
                    .ok()
                    .filter(|v: &f64| (0.0..=1.0).contains(v))
                    .ok_or_else(|| schema(Some(row), format!("human_cloze {raw:?} not in [0, 1]")))?;
                Some(value)
            }
        };

        if let Some(first) = seen.insert((item_id.clone(), condition.clone()), row) {
            return Err(ExperimentError::DuplicateStimulus {
                item_id,
                condition: condition.to_string(),
                row,
                first_row: first,
            });
        }
        stimuli.push(Stimulus::new(
            item_id,
            condition,
            record.get(sentence_col).unwrap_or(""),
            target_index,
            human_cloze,
        )?);
    }

    if stimuli.is_empty() {
        return Err(ExperimentError::EmptyStimuli(path.to_path_buf()));
    }
    for warning in check_item_sets(&stimuli) {
        log::warn!("{warning}");
    }
    Ok(stimuli)
}

/// Stimuli of one item are expected to differ only around the target.
/// Returns one message per item that does not.
pub fn check_item_sets(stimuli: &[Stimulus]) -> Vec<String> {
    let mut by_item: BTreeMap<&str, Vec<&Stimulus>> = BTreeMap::new();
    for s in stimuli {
        by_item.entry(&s.item_id).or_default().push(s);
    }
    let mut warnings = Vec::new();
    for (item, group) in by_item {
        let first = group[0];
        for other in &group[1..] {
            let same_prefix = first.target_index == other.target_index
                && first.words[..first.target_index.saturating_sub(1)]
                    == other.words[..other.target_index.saturating_sub(1)];
            if !same_prefix {
                warnings.push(format!(
                    "item {item}: {} and {} differ before the target",
                    first.condition, other.condition
                ));
            }
        }
    }
    warnings
}
