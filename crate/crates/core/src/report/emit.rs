use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ReportError, RunReport, REPORT_FORMAT_VERSION};
use crate::simenv::EpisodeTrace;

pub const HISTOGRAM_BINS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Equal-width bins over `[min, max]`; the last bin is closed. A constant
/// sample puts everything in the first bin.
pub fn latency_histogram(values: &[f64], bins: usize) -> Vec<HistogramBin> {
    let bins = bins.max(1);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() {
        return Vec::new();
    }
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|b| HistogramBin {
            lo: lo + b as f64 * width,
            hi: if b + 1 == bins && hi > lo {
                hi
            } else {
                lo + (b + 1) as f64 * width
            },
            count: 0,
        })
        .collect();
    for v in values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        out[b].count += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmittedFiles {
    pub report: PathBuf,
    pub utilization_csv: PathBuf,
    pub latency_histogram_csv: PathBuf,
}

fn companion(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}_{suffix}.csv"))
}

/// Writes the report JSON at `path` plus `<stem>_utilization.csv` and
/// `<stem>_latency_hist.csv` beside it.
pub fn emit_report(
    report: &RunReport,
    trace: &EpisodeTrace,
    path: &Path,
) -> Result<EmittedFiles, ReportError> {
    let files = EmittedFiles {
        report: path.to_path_buf(),
        utilization_csv: companion(path, "utilization"),
        latency_histogram_csv: companion(path, "latency_hist"),
    };
    let write = |p: &Path, body: String| {
        std::fs::write(p, body).map_err(|source| ReportError::Io {
            path: p.display().to_string(),
            source,
        })
    };
    let mut json = serde_json::to_string_pretty(report).map_err(|e| ReportError::Format(e.to_string()))?;
    json.push('\n');
    write(&files.report, json)?;

    let mut util = String::from("tick,cpu_util,mem_util,storage_util,active_vms\n");
    for r in &trace.rows {
        util.push_str(&format!(
            "{},{},{},{},{}\n",
            r.tick, r.cpu_util, r.mem_util, r.storage_util, r.active_vms
        ));
    }
    write(&files.utilization_csv, util)?;

    let lat: Vec<f64> = trace.rows.iter().map(|r| r.latency_ms).collect();
    let mut hist = String::from("bin,lo_ms,hi_ms,count\n");
    for (i, b) in latency_histogram(&lat, HISTOGRAM_BINS).iter().enumerate() {
        hist.push_str(&format!("{i},{},{},{}\n", b.lo, b.hi, b.count));
    }
    write(&files.latency_histogram_csv, hist)?;
    Ok(files)
}

/// Parses a report JSON, rejecting unknown fields and other format versions.
pub fn parse_report(text: &str) -> Result<RunReport, ReportError> {
    let r: RunReport = serde_json::from_str(text).map_err(|e| ReportError::Format(e.to_string()))?;
    if r.format_version != REPORT_FORMAT_VERSION {
        return Err(ReportError::Format(format!(
            "format_version {:?}, expected {REPORT_FORMAT_VERSION:?}",
            r.format_version
        )));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::tests::row;
    use crate::report::CostRates;
    use crate::simenv::ConstraintSet;

    #[test]
    fn histogram_conserves_count() {
        let v: Vec<f64> = (0..777).map(|i| 10.0 + (i * 31 % 97) as f64).collect();
        let h = latency_histogram(&v, 50);
        assert_eq!(h.len(), 50);
        assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 777);
        assert_eq!(latency_histogram(&[5.0; 4], 50)[0].count, 4);
    }

    #[test]
    fn emit_and_parse_round_trip() {
        let trace = EpisodeTrace {
            policy: "static".into(),
            seed: 3,
            rows: (0..40)
                .map(|t| row(t, 0.3 + t as f64 / 100.0, 20.0 + t as f64))
                .collect(),
        };
        let r = RunReport::from_trace(&trace, &ConstraintSet::default(), &CostRates::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&r, &trace, &dir.path().join("run.json")).unwrap();
        let text = std::fs::read_to_string(&files.report).unwrap();
        assert!(text.contains("\"format_version\": \"1\""));
        assert!(text.ends_with('\n'));
        assert_eq!(parse_report(&text).unwrap(), r);
        let hist = std::fs::read_to_string(&files.latency_histogram_csv).unwrap();
        assert_eq!(hist.lines().count(), 51);
        let util = std::fs::read_to_string(files.utilization_csv).unwrap();
        assert_eq!(util.lines().count(), 41);
        assert!(parse_report(&text.replace("\"1\"", "\"2\"")).is_err());
    }
}
