//! Margin deltas and verdict flips between two report files.

use serde::{Deserialize, Serialize};
use simlab_core::{InequalityReport, Verdict};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CompareError {
    #[error("check keys differ: only in a: {only_a:?}; only in b: {only_b:?}")]
    MismatchedKeys {
        only_a: Vec<String>,
        only_b: Vec<String>,
    },
    #[error("duplicate check key {0:?}")]
    DuplicateKey(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffEntry {
    pub check: String,
    pub margin_a: f64,
    pub margin_b: f64,
    pub delta: f64,
    /// `|delta|` in units of the joint standard error of the two margins.
    pub delta_sigma: f64,
    pub verdict_a: Verdict,
    pub verdict_b: Verdict,
    pub flipped: bool,
}

/// Entries only for checks whose margin or verdict differ; identical inputs
/// give an empty list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DiffDocument {
    pub entries: Vec<DiffEntry>,
    pub flips: usize,
}

fn index(reports: &[InequalityReport]) -> Result<BTreeMap<&str, &InequalityReport>, CompareError> {
    let mut map = BTreeMap::new();
    for r in reports {
        if map.insert(r.check.as_str(), r).is_some() {
            return Err(CompareError::DuplicateKey(r.check.clone()));
        }
    }
    Ok(map)
}

fn margin_se(r: &InequalityReport) -> f64 {
    (r.lhs_se * r.lhs_se + r.rhs_se * r.rhs_se).sqrt()
}

fn same(a: f64, b: f64) -> bool {
    a == b || (a.is_nan() && b.is_nan())
}

pub fn compare(
    a: &[InequalityReport],
    b: &[InequalityReport],
) -> Result<DiffDocument, CompareError> {
    let (ia, ib) = (index(a)?, index(b)?);
    let only_a: Vec<String> = ia
        .keys()
        .filter(|k| !ib.contains_key(*k))
        .map(|k| k.to_string())
        .collect();
    let only_b: Vec<String> = ib
        .keys()
        .filter(|k| !ia.contains_key(*k))
        .map(|k| k.to_string())
        .collect();
    if !only_a.is_empty() || !only_b.is_empty() {
        return Err(CompareError::MismatchedKeys { only_a, only_b });
    }
    let mut doc = DiffDocument::default();
    for (key, ra) in &ia {
        let rb = ib[key];
        let flipped = ra.verdict.is_fail() != rb.verdict.is_fail();
        if same(ra.margin, rb.margin) && ra.verdict == rb.verdict {
            continue;
        }
        let delta = rb.margin - ra.margin;
        let se = (margin_se(ra).powi(2) + margin_se(rb).powi(2)).sqrt();
        doc.flips += usize::from(flipped);
        doc.entries.push(DiffEntry {
            check: key.to_string(),
            margin_a: ra.margin,
            margin_b: rb.margin,
            delta,
            delta_sigma: if se > 0.0 {
                delta.abs() / se
            } else {
                f64::INFINITY
            },
            verdict_a: ra.verdict,
            verdict_b: rb.verdict,
            flipped,
        });
    }
    Ok(doc)
}
