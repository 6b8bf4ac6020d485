//! Scaling data: per check and quantity, the largest measured value per
//! fixture against `n`. Data only, no rendering.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Result;

use crate::suite::SuiteReport;

fn slug(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}

/// Writes `<dir>/<check>_<quantity>.csv` with header `n,fixture,measured`,
/// one row per fixture sorted by `n`. Spread rows are skipped.
pub fn emit_plotdata(report: &SuiteReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for check in &report.checks {
        let mut series: BTreeMap<&str, Vec<(usize, &str, f64)>> = BTreeMap::new();
        for r in check.rows.iter().filter(|r| r.n > 0 && r.error.is_none()) {
            let points = series.entry(&r.quantity).or_default();
            match points.iter_mut().find(|p| p.1 == r.fixture) {
                Some(p) => p.2 = p.2.max(r.measured),
                None => points.push((r.n, &r.fixture, r.measured)),
            }
        }
        for (quantity, mut points) in series {
            points.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(b.1)));
            let path = dir.join(format!("{}_{}.csv", check.id, slug(quantity)));
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["n", "fixture", "measured"])?;
            for (n, fixture, m) in points {
                w.write_record([n.to_string(), fixture.to_string(), m.to_string()])?;
            }
            w.flush()?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slug("nf/(2 star)"), "nf_2_star");
        assert_eq!(slug("||a+||_1"), "a_1");
    }
}
