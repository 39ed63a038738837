//! Per-cell aggregated results and their CSV serialization.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

pub const CSV_HEADER: &str =
    "classifier,selector,n,sigma,error_pct,stderr,train_s,score_s_per_sample,fallback_count,mean_gamma_b,mean_gamma_z";

/// Aggregated numbers for one (classifier, n, σ) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub classifier: String,
    pub selector: String,
    pub n_per_class: usize,
    pub sigma: f64,
    /// 100 · misclassified / scored, exact over the whole cell.
    pub error_pct: f64,
    /// Standard error of the per-training-trial error percentages.
    pub stderr_pct: f64,
    pub train_s: f64,
    pub score_s_per_sample: f64,
    pub fallback_count: u64,
    pub mean_gamma_b: f64,
    pub mean_gamma_z: f64,
}

fn sort_key(r: &CellReport) -> (String, String, usize, u64) {
    (r.classifier.clone(), r.selector.clone(), r.n_per_class, r.sigma.to_bits())
}

fn format_row(r: &CellReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        r.classifier,
        r.selector,
        r.n_per_class,
        r.sigma,
        r.error_pct,
        r.stderr_pct,
        r.train_s,
        r.score_s_per_sample,
        r.fallback_count,
        r.mean_gamma_b,
        r.mean_gamma_z
    )
}

/// Writes the report table, one row per cell, sorted by
/// (classifier, selector, n, σ). The write is atomic: the file appears
/// complete or not at all.
pub fn emit_csv(reports: &[CellReport], path: &Path) -> Result<()> {
    let mut sorted: Vec<&CellReport> = reports.iter().collect();
    sorted.sort_by_key(|r| sort_key(r));

    let mut text = String::with_capacity(128 * (sorted.len() + 1));
    text.push_str(CSV_HEADER);
    text.push('\n');
    for r in sorted {
        text.push_str(&format_row(r));
        text.push('\n');
    }

    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| HarnessError::Io(e.error))?;
    Ok(())
}

/// Parses a file produced by [`emit_csv`] back into reports.
pub fn parse_csv(text: &str) -> Result<Vec<CellReport>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| HarnessError::Serde("empty report file".into()))?;
    if header != CSV_HEADER {
        return Err(HarnessError::Serde(format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for (no, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(HarnessError::Serde(format!(
                "row {}: expected 11 fields, got {}",
                no + 2,
                fields.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse()
                .map_err(|_| HarnessError::Serde(format!("row {}: bad number {:?}", no + 2, fields[i])))
        };
        out.push(CellReport {
            classifier: fields[0].to_string(),
            selector: fields[1].to_string(),
            n_per_class: fields[2]
                .parse()
                .map_err(|_| HarnessError::Serde(format!("row {}: bad count", no + 2)))?,
            sigma: num(3)?,
            error_pct: num(4)?,
            stderr_pct: num(5)?,
            train_s: num(6)?,
            score_s_per_sample: num(7)?,
            fallback_count: fields[8]
                .parse()
                .map_err(|_| HarnessError::Serde(format!("row {}: bad count", no + 2)))?,
            mean_gamma_b: num(9)?,
            mean_gamma_z: num(10)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(classifier: &str, selector: &str, n: usize, sigma: f64) -> CellReport {
        CellReport {
            classifier: classifier.into(),
            selector: selector.into(),
            n_per_class: n,
            sigma,
            error_pct: 7.25,
            stderr_pct: 0.5,
            train_s: 0.001953125,
            score_s_per_sample: 3.0517578125e-05,
            fallback_count: 3,
            mean_gamma_b: 0.12345678901234567,
            mean_gamma_z: 1.9984014443252818e-15,
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        emit_csv(&[], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn two_cells_make_three_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        emit_csv(&[sample("lda", "none", 50, 0.0), sample("r2lda", "bpr", 50, 0.1)], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn rows_are_sorted_by_classifier_then_n_then_sigma() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let reports = vec![
            sample("r2lda", "gcv", 100, 0.2),
            sample("lda", "none", 200, 0.0),
            sample("r2lda", "bpr", 50, 0.1),
            sample("r2lda", "bpr", 50, 0.0),
            sample("lda", "none", 50, 0.0),
        ];
        emit_csv(&reports, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let firsts: Vec<String> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').take(4).collect::<Vec<_>>().join(","))
            .collect();
        assert_eq!(
            firsts,
            vec![
                "lda,none,50,0",
                "lda,none,200,0",
                "r2lda,bpr,50,0",
                "r2lda,bpr,50,0.1",
                "r2lda,gcv,100,0.2",
            ]
        );
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let reports = vec![sample("r2lda", "copra", 75, 0.15), sample("rlda", "copra", 75, 0.0)];
        emit_csv(&reports, &path).unwrap();
        let parsed = parse_csv(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(parsed.len(), 2);
        for p in &parsed {
            let orig = reports
                .iter()
                .find(|r| r.classifier == p.classifier && r.sigma == p.sigma)
                .unwrap();
            assert!((p.error_pct - orig.error_pct).abs() <= 1e-12);
            assert_eq!(p.mean_gamma_b, orig.mean_gamma_b);
            assert_eq!(p.mean_gamma_z, orig.mean_gamma_z);
            assert_eq!(p.train_s, orig.train_s);
        }
    }
}
