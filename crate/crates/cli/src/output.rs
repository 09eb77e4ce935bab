//! Artifact writers. All files are written after the run, by one writer.

use crate::suite::SuiteOutcome;
use serde::Serialize;
use simlab_core::InequalityReport;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

pub const SUMMARY_HEADER: [&str; 10] = [
    "check", "paper_eq", "scenario", "lhs", "lhs_se", "rhs", "rhs_se", "margin", "verdict", "seed",
];

/// File-name stem for a report key: `"fernique[lambda=0.05]"` → `"fernique_lambda_0.05"`.
pub fn file_stem(key: &str) -> String {
    let mut s: String = key
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    while s.contains("__") {
        s = s.replace("__", "_");
    }
    s.trim_matches('_').to_string()
}

pub fn write_summary<W: Write>(w: W, reports: &[InequalityReport]) -> io::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(SUMMARY_HEADER)?;
    for r in reports {
        wr.write_record([
            r.check.clone(),
            r.paper_eq.to_string(),
            r.scenario.clone(),
            r.lhs.to_string(),
            r.lhs_se.to_string(),
            r.rhs.to_string(),
            r.rhs_se.to_string(),
            r.margin.to_string(),
            r.verdict.as_str().to_string(),
            r.seed.to_string(),
        ])?;
    }
    wr.flush()
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> io::Result<()> {
    let mut wr = csv::Writer::from_path(path)?;
    for row in rows {
        wr.serialize(row)?;
    }
    wr.flush()
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

pub fn write_reports(path: &Path, reports: &[InequalityReport]) -> io::Result<()> {
    write_json(path, reports)
}

pub fn read_reports(path: &Path) -> io::Result<Vec<InequalityReport>> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

/// Writes `report.json`, `summary.csv` and every plot-data file into `dir`.
pub fn write_outcome(dir: &Path, outcome: &SuiteOutcome) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    write_reports(&dir.join("report.json"), &outcome.reports)?;
    write_summary(fs::File::create(dir.join("summary.csv"))?, &outcome.reports)?;
    for (key, rows) in &outcome.tails {
        write_rows(&dir.join(format!("tail_{}.csv", file_stem(key))), rows)?;
    }
    for (key, rows) in &outcome.integrability {
        write_rows(
            &dir.join(format!("integrability_{}.csv", file_stem(key))),
            rows,
        )?;
    }
    for (key, rows) in &outcome.eps_beta {
        write_rows(&dir.join(format!("beta_{}.csv", file_stem(key))), rows)?;
    }
    if !outcome.estimates.is_empty() {
        write_json(&dir.join("estimates.json"), &outcome.estimates)?;
    }
    if let Some(tr) = &outcome.trajectory {
        tr.write_csv(io::BufWriter::new(fs::File::create(
            dir.join("trajectory.csv"),
        )?))?;
    }
    if let Some(ens) = &outcome.ensemble {
        ens.write_csv(io::BufWriter::new(fs::File::create(
            dir.join("ensemble.csv"),
        )?))?;
    }
    Ok(())
}
