use std::path::Path;

use serde_json::{json, Map, Value};

use super::{
    ComparisonRow, ConditionSummary, EffectSizes, ExperimentError, SweepReport, SweepRow,
};
use crate::decomposition::Decomposition;
use crate::experiment::Condition;
use crate::report::{
    csv_string, field, format_opt, format_sig, json_num, json_opt, num_field, opt_num_field,
    pretty, read_file, sidecar_path, Provenance, Report, ReportError,
};

const DECOMPOSITION_HEADER: [&str; 11] = [
    "item_id",
    "condition",
    "lambda",
    "S",
    "A",
    "B",
    "veridical_posterior",
    "posterior_entropy",
    "veridical_rank",
    "n_candidates",
    "map_word",
];
const SWEEP_HEADER: [&str; 7] = ["lambda", "condition", "mean_A", "mean_B", "se_A", "se_B", "n"];
const EFFECTS_HEADER: [&str; 7] = [
    "condition",
    "mean_A_diff",
    "mean_B_diff",
    "mean_S_diff",
    "se_A_diff",
    "se_B_diff",
    "n_items",
];
const COMPARISON_HEADER: [&str; 6] = [
    "condition",
    "mean_human_cloze",
    "n_cloze",
    "mean_surprisal",
    "se_surprisal",
    "n",
];

fn provenance_value(p: &Provenance) -> Value {
    serde_json::to_value(p).expect("provenance serializes")
}

fn parse_provenance(value: &Value) -> Result<Provenance, ReportError> {
    serde_json::from_value(value.clone())
        .map_err(|e| ReportError::Malformed(format!("provenance: {e}")))
}

fn malformed(message: impl Into<String>) -> ReportError {
    ReportError::Malformed(message.into())
}

/// Per-stimulus decompositions.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    pub provenance: Provenance,
    pub rows: Vec<Decomposition>,
}

impl Report for DecompositionReport {
    fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    fn to_csv(&self) -> String {
        csv_string(
            &DECOMPOSITION_HEADER,
            self.rows.iter().map(|d| {
                vec![
                    d.item_id.clone(),
                    d.condition.to_string(),
                    format_sig(d.lambda),
                    format_sig(d.surprisal_s),
                    format_sig(d.heuristic_a),
                    format_sig(d.discrepancy_b),
                    format_sig(d.veridical_posterior),
                    format_sig(d.posterior_entropy),
                    d.veridical_rank.map(|r| r.to_string()).unwrap_or_default(),
                    d.n_candidates.to_string(),
                    d.map_word.clone(),
                ]
            }),
        )
    }

    fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|d| {
                json!({
                    "item_id": d.item_id,
                    "condition": d.condition.to_string(),
                    "lambda": json_num(d.lambda),
                    "S": json_num(d.surprisal_s),
                    "A": json_num(d.heuristic_a),
                    "B": json_num(d.discrepancy_b),
                    "veridical_posterior": json_num(d.veridical_posterior),
                    "posterior_entropy": json_num(d.posterior_entropy),
                    "veridical_rank": d.veridical_rank,
                    "n_candidates": d.n_candidates,
                    "map_word": d.map_word,
                })
            })
            .collect();
        pretty(&json!({
            "provenance": provenance_value(&self.provenance),
            "rows": rows,
        }))
    }
}

fn decomposition_from_json(v: &Value) -> Result<Decomposition, ReportError> {
    let string = |key: &str| -> Result<String, ReportError> {
        field(v, key)?
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| malformed(format!("field {key:?} is not a string")))
    };
    let count = |key: &str| -> Result<usize, ReportError> {
        field(v, key)?
            .as_u64()
            .map(|n| n as usize)
            .ok_or_else(|| malformed(format!("field {key:?} is not a count")))
    };
    Ok(Decomposition {
        item_id: string("item_id")?,
        condition: Condition::parse(&string("condition")?),
        lambda: num_field(v, "lambda")?,
        surprisal_s: num_field(v, "S")?,
        heuristic_a: num_field(v, "A")?,
        discrepancy_b: num_field(v, "B")?,
        veridical_posterior: num_field(v, "veridical_posterior")?,
        posterior_entropy: num_field(v, "posterior_entropy")?,
        veridical_rank: match v.get("veridical_rank") {
            None | Some(Value::Null) => None,
            Some(r) => Some(
                r.as_u64()
                    .ok_or_else(|| malformed("field \"veridical_rank\" is not a count"))?
                    as usize,
            ),
        },
        n_candidates: count("n_candidates")?,
        map_word: string("map_word")?,
    })
}

fn decomposition_from_csv(text: &str) -> Result<Vec<Decomposition>, ReportError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| malformed(e.to_string()))?.clone();
    let mut positions = Vec::with_capacity(DECOMPOSITION_HEADER.len());
    for name in DECOMPOSITION_HEADER {
        positions.push(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| malformed(format!("missing column {name:?}")))?,
        );
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| malformed(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let get = |i: usize| record.get(positions[i]).unwrap_or("");
        let num = |i: usize| -> Result<f64, ReportError> {
            get(i).parse().map_err(|_| {
                malformed(format!("row {line}: {} {:?} is not a number", DECOMPOSITION_HEADER[i], get(i)))
            })
        };
        let count = |i: usize| -> Result<usize, ReportError> {
            get(i).parse().map_err(|_| {
                malformed(format!("row {line}: {} {:?} is not a count", DECOMPOSITION_HEADER[i], get(i)))
            })
        };
        rows.push(Decomposition {
            item_id: get(0).to_string(),
            condition: Condition::parse(get(1)),
            lambda: num(2)?,
            surprisal_s: num(3)?,
            heuristic_a: num(4)?,
            discrepancy_b: num(5)?,
            veridical_posterior: num(6)?,
            posterior_entropy: num(7)?,
            veridical_rank: if get(8).is_empty() { None } else { Some(count(8)?) },
            n_candidates: count(9)?,
            map_word: get(10).to_string(),
        });
    }
    Ok(rows)
}

/// Reads a decomposition report written as CSV or JSON. For CSV the
/// provenance is taken from the sidecar when present.
pub fn load_decomposition_report(path: &Path) -> Result<DecompositionReport, ExperimentError> {
    let text = read_file(path)?;
    if text.trim_start().starts_with('{') {
        let value: Value = serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))?;
        let rows = field(&value, "rows")?
            .as_array()
            .ok_or_else(|| malformed("\"rows\" is not an array"))?
            .iter()
            .map(decomposition_from_json)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DecompositionReport {
            provenance: parse_provenance(field(&value, "provenance")?)?,
            rows,
        })
    } else {
        let rows = decomposition_from_csv(&text)?;
        let sidecar = sidecar_path(path);
        let provenance = if sidecar.exists() {
            let value: Value = serde_json::from_str(&read_file(&sidecar)?)
                .map_err(|e| malformed(e.to_string()))?;
            parse_provenance(&value)?
        } else {
            Provenance::new(None, json!({}))
        };
        Ok(DecompositionReport { provenance, rows })
    }
}

fn summary_json(s: &ConditionSummary) -> Value {
    json!({
        "mean_A": json_num(s.mean_a),
        "mean_B": json_num(s.mean_b),
        "mean_S": json_num(s.mean_s),
        "se_A": json_opt(s.se_a),
        "se_B": json_opt(s.se_b),
        "n": s.n,
    })
}

fn summary_from_json(condition: Condition, v: &Value) -> Result<ConditionSummary, ReportError> {
    Ok(ConditionSummary {
        condition,
        mean_a: num_field(v, "mean_A")?,
        mean_b: num_field(v, "mean_B")?,
        mean_s: num_field(v, "mean_S")?,
        se_a: opt_num_field(v, "se_A")?,
        se_b: opt_num_field(v, "se_B")?,
        n: field(v, "n")?
            .as_u64()
            .ok_or_else(|| malformed("field \"n\" is not a count"))? as usize,
    })
}

impl Report for SweepReport {
    fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    fn to_csv(&self) -> String {
        csv_string(
            &SWEEP_HEADER,
            self.rows.iter().map(|r| {
                vec![
                    format_sig(r.lambda),
                    r.summary.condition.to_string(),
                    format_sig(r.summary.mean_a),
                    format_sig(r.summary.mean_b),
                    format_opt(r.summary.se_a),
                    format_opt(r.summary.se_b),
                    r.summary.n.to_string(),
                ]
            }),
        )
    }

    /// Keyed by lambda, then condition.
    fn to_json(&self) -> String {
        let mut sweep = Map::new();
        for row in &self.rows {
            let entry = sweep
                .entry(format_sig(row.lambda))
                .or_insert_with(|| Value::Object(Map::new()));
            entry
                .as_object_mut()
                .expect("lambda entries are objects")
                .insert(row.summary.condition.to_string(), summary_json(&row.summary));
        }
        pretty(&json!({
            "provenance": provenance_value(&self.provenance),
            "sweep": sweep,
        }))
    }
}

impl SweepReport {
    /// Parses the JSON rendering. Values come back at printed precision.
    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        let value: Value = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
        let sweep = field(&value, "sweep")?
            .as_object()
            .ok_or_else(|| malformed("\"sweep\" is not an object"))?;
        let mut rows = Vec::new();
        for (key, conditions) in sweep {
            let lambda: f64 = key
                .parse()
                .map_err(|_| malformed(format!("lambda key {key:?} is not a number")))?;
            let conditions = conditions
                .as_object()
                .ok_or_else(|| malformed(format!("entry for lambda {key} is not an object")))?;
            for (label, summary) in conditions {
                rows.push(SweepRow {
                    lambda,
                    summary: summary_from_json(Condition::parse(label), summary)?,
                });
            }
        }
        Ok(SweepReport {
            provenance: parse_provenance(field(&value, "provenance")?)?,
            rows,
        })
    }

    pub fn load_json(path: &Path) -> Result<Self, ReportError> {
        Self::from_json(&read_file(path)?)
    }
}

impl Report for EffectSizes {
    fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    fn to_csv(&self) -> String {
        csv_string(
            &EFFECTS_HEADER,
            self.effects.iter().map(|e| {
                vec![
                    e.condition.to_string(),
                    format_sig(e.mean_a_diff),
                    format_sig(e.mean_b_diff),
                    format_sig(e.mean_s_diff),
                    format_opt(e.se_a_diff),
                    format_opt(e.se_b_diff),
                    e.n_items.to_string(),
                ]
            }),
        )
    }

    fn to_json(&self) -> String {
        let mut summaries = Map::new();
        for s in &self.summaries {
            summaries.insert(s.condition.to_string(), summary_json(s));
        }
        let mut effects = Map::new();
        for e in &self.effects {
            let items: Vec<Value> = e
                .items
                .iter()
                .map(|i| {
                    json!({
                        "item_id": i.item_id,
                        "A_diff": json_num(i.a_diff),
                        "B_diff": json_num(i.b_diff),
                        "S_diff": json_num(i.s_diff),
                    })
                })
                .collect();
            effects.insert(
                e.condition.to_string(),
                json!({
                    "mean_A_diff": json_num(e.mean_a_diff),
                    "mean_B_diff": json_num(e.mean_b_diff),
                    "mean_S_diff": json_num(e.mean_s_diff),
                    "se_A_diff": json_opt(e.se_a_diff),
                    "se_B_diff": json_opt(e.se_b_diff),
                    "n_items": e.n_items,
                    "items": items,
                }),
            );
        }
        pretty(&json!({
            "provenance": provenance_value(&self.provenance),
            "lambda": json_num(self.lambda),
            "conditions": summaries,
            "effects": effects,
        }))
    }
}

/// Human cloze beside model surprisal per condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub provenance: Provenance,
    pub rows: Vec<ComparisonRow>,
}

impl Report for ComparisonTable {
    fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    fn to_csv(&self) -> String {
        csv_string(
            &COMPARISON_HEADER,
            self.rows.iter().map(|r| {
                vec![
                    r.condition.to_string(),
                    format_opt(r.mean_human_cloze),
                    r.n_cloze.to_string(),
                    format_sig(r.mean_surprisal),
                    format_opt(r.se_surprisal),
                    r.n.to_string(),
                ]
            }),
        )
    }

    fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                json!({
                    "condition": r.condition.to_string(),
                    "mean_human_cloze": json_opt(r.mean_human_cloze),
                    "n_cloze": r.n_cloze,
                    "mean_surprisal": json_num(r.mean_surprisal),
                    "se_surprisal": json_opt(r.se_surprisal),
                    "n": r.n,
                })
            })
            .collect();
        pretty(&json!({
            "provenance": provenance_value(&self.provenance),
            "rows": rows,
        }))
    }
}
