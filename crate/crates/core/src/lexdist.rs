//! Character-level Levenshtein distance between words.
//!
//! Both words are case-folded before comparison and every edit (insertion,
//! deletion, substitution) costs 1. The normalized form divides by the
//! length of the longer word so that it lies in `[0, 1]`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EditDistance {
    /// Number of unit edits.
    pub raw: usize,
    /// `raw / max(len(a), len(b))`, or 0 when both words are empty.
    pub normalized: f64,
}

impl EditDistance {
    pub const ZERO: EditDistance = EditDistance {
        raw: 0,
        normalized: 0.0,
    };
}

/// Levenshtein distance over Unicode scalar values of the case-folded words.
pub fn levenshtein(a: &str, b: &str) -> EditDistance {
    let (raw, longest) = if a.is_ascii() && b.is_ascii() {
        let (a, b) = (a.as_bytes(), b.as_bytes());
        (distance(a, b, |x, y| x.eq_ignore_ascii_case(&y)), a.len().max(b.len()))
    } else {
        let a: Vec<char> = a.chars().flat_map(char::to_lowercase).collect();
        let b: Vec<char> = b.chars().flat_map(char::to_lowercase).collect();
        (distance(&a, &b, |x, y| x == y), a.len().max(b.len()))
    };
    let normalized = if longest == 0 {
        0.0
    } else {
        raw as f64 / longest as f64
    };
    EditDistance { raw, normalized }
}

fn distance<T: Copy>(a: &[T], b: &[T], same: impl Fn(T, T) -> bool) -> usize {
    // keep the shorter word along the row
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return long.len();
    }

    let mut stack = [0usize; 64];
    let mut heap = Vec::new();
    let row: &mut [usize] = if short.len() < stack.len() {
        &mut stack[..=short.len()]
    } else {
        heap.resize(short.len() + 1, 0);
        &mut heap
    };
    for (j, cell) in row.iter_mut().enumerate() {
        *cell = j;
    }
    for (i, &lc) in long.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, &sc) in short.iter().enumerate() {
            let above = row[j + 1];
            let substitution = diag + usize::from(!same(lc, sc));
            row[j + 1] = substitution.min(above + 1).min(row[j] + 1);
            diag = above;
        }
    }
    row[short.len()]
}
