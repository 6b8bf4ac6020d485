//! Report files: one CSV per check, a fingerprint CSV and a JSON summary.
//! Timings go to their own file so the rest is byte-identical across runs.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::CheckId;
use crate::suite::{Row, SuiteReport, Timings};

#[derive(Serialize)]
struct CheckSummary<'a> {
    id: CheckId,
    title: &'a str,
    passed: bool,
    rows: usize,
    failed: Vec<&'a Row>,
    worst: Option<&'a Row>,
}

#[derive(Serialize)]
struct Summary<'a> {
    passed: bool,
    checks: Vec<CheckSummary<'a>>,
    fingerprints: &'a [crate::suite::Fingerprint],
}

pub fn write_rows(path: &Path, rows: &[Row]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["check", "fixture", "n", "field", "quantity", "case", "measured", "ceiling", "passed", "error"])?;
    for r in rows {
        w.write_record([
            r.check.to_string(),
            r.fixture.clone(),
            r.n.to_string(),
            r.field.clone(),
            r.quantity.clone(),
            r.case.clone(),
            r.measured.to_string(),
            r.ceiling.to_string(),
            r.passed.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_report(dir: &Path, report: &SuiteReport, timings: &Timings) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for check in &report.checks {
        write_rows(&dir.join(format!("{}.csv", check.id)), &check.rows)?;
    }
    let mut w = csv::Writer::from_path(dir.join("fingerprints.csv"))?;
    for fp in &report.fingerprints {
        w.serialize(fp)?;
    }
    w.flush()?;
    let summary = Summary {
        passed: report.passed(),
        checks: report
            .checks
            .iter()
            .map(|c| CheckSummary {
                id: c.id,
                title: &c.title,
                passed: c.passed,
                rows: c.rows.len(),
                failed: c.failed_rows().collect(),
                worst: c.worst(),
            })
            .collect(),
        fingerprints: &report.fingerprints,
    };
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    fs::write(dir.join("timings.json"), serde_json::to_string_pretty(timings)?)?;
    Ok(())
}

/// One line per check: `A1 PASS ...` or `A1 FAIL ...`.
pub fn summary_lines(report: &SuiteReport, timings: &Timings) -> Vec<String> {
    report
        .checks
        .iter()
        .map(|c| {
            let secs = timings.0.iter().find(|(id, _)| *id == c.id).map_or(0.0, |t| t.1);
            let worst = c
                .worst()
                .map(|r| format!("worst {} {} = {:.4e} (ceiling {:.4e})", r.fixture, r.quantity, r.measured, r.ceiling))
                .unwrap_or_default();
            format!(
                "{} {} {} [{} rows, {} failed, {:.1}s] {}",
                c.id,
                if c.passed { "PASS" } else { "FAIL" },
                c.title,
                c.rows.len(),
                c.failed_rows().count(),
                secs,
                worst
            )
        })
        .collect()
}
