//! Evaluation artifacts: utilization and latency statistics, SLA and
//! violation rates, cost breakdowns, run comparisons and plot data.

mod cost;
mod emit;
mod stats;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cost::{cost_of_run, round1, savings_rate, CostBreakdown, CostRates};
pub use emit::{emit_report, latency_histogram, parse_report, EmittedFiles, HistogramBin, HISTOGRAM_BINS};
pub use stats::{
    coefficient_of_variation, early_warning_hit_rate, percentile, sla_rate, threshold_crossing_events,
    CrossingEvent, HitRate,
};

use crate::simenv::{ConstraintSet, EpisodeTrace};

pub const REPORT_FORMAT_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{0} is empty")]
    Empty(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("runs differ in length: baseline {baseline} ticks, candidate {candidate}")]
    TickMismatch { baseline: usize, candidate: usize },
    #[error("report: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub format_version: String,
    pub policy: String,
    pub seed: u64,
    pub ticks: usize,
    pub avg_cpu_util: f64,
    pub peak_cpu_util: f64,
    pub avg_mem_util: f64,
    pub peak_mem_util: f64,
    pub avg_storage_util: f64,
    pub peak_storage_util: f64,
    pub latency_p50_ms: f64,
    pub latency_p95_ms: f64,
    pub latency_p99_ms: f64,
    pub latency_p999_ms: f64,
    pub latency_mean_ms: f64,
    pub latency_cv: f64,
    pub sla_rate: f64,
    pub violation_rate: f64,
    pub cost: CostBreakdown,
}

fn mean_peak(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = v.clone().count().max(1) as f64;
    (v.clone().sum::<f64>() / n, v.fold(0.0, f64::max))
}

impl RunReport {
    pub fn from_trace(
        trace: &EpisodeTrace,
        constraints: &ConstraintSet,
        rates: &CostRates,
    ) -> Result<Self, ReportError> {
        if trace.is_empty() {
            return Err(ReportError::Empty("episode"));
        }
        let rows = &trace.rows;
        let lat: Vec<f64> = rows.iter().map(|r| r.latency_ms).collect();
        let (avg_cpu_util, peak_cpu_util) = mean_peak(rows.iter().map(|r| r.cpu_util));
        let (avg_mem_util, peak_mem_util) = mean_peak(rows.iter().map(|r| r.mem_util));
        let (avg_storage_util, peak_storage_util) = mean_peak(rows.iter().map(|r| r.storage_util));
        Ok(Self {
            format_version: REPORT_FORMAT_VERSION.into(),
            policy: trace.policy.clone(),
            seed: trace.seed,
            ticks: rows.len(),
            avg_cpu_util,
            peak_cpu_util,
            avg_mem_util,
            peak_mem_util,
            avg_storage_util,
            peak_storage_util,
            latency_p50_ms: percentile(&lat, 0.50)?,
            latency_p95_ms: percentile(&lat, 0.95)?,
            latency_p99_ms: percentile(&lat, 0.99)?,
            latency_p999_ms: percentile(&lat, 0.999)?,
            latency_mean_ms: lat.iter().sum::<f64>() / lat.len() as f64,
            latency_cv: coefficient_of_variation(&lat)?,
            sla_rate: sla_rate(&lat, constraints.p99_latency_max)?,
            violation_rate: trace.violation_rate(),
            cost: cost_of_run(trace, rates),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricChange {
    pub metric: String,
    pub baseline: f64,
    pub candidate: f64,
    /// `candidate − baseline`; for fractions times 100 this is percentage points.
    pub absolute_change: f64,
    /// `100 · (candidate − baseline) / baseline`; `None` when the baseline is 0.
    pub relative_change_pct: Option<f64>,
}

impl MetricChange {
    pub fn new(metric: &str, baseline: f64, candidate: f64) -> Self {
        Self {
            metric: metric.into(),
            baseline,
            candidate,
            absolute_change: candidate - baseline,
            relative_change_pct: (baseline != 0.0).then(|| 100.0 * (candidate - baseline) / baseline),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline_policy: String,
    pub candidate_policy: String,
    pub changes: Vec<MetricChange>,
}

impl Comparison {
    pub fn get(&self, metric: &str) -> Option<&MetricChange> {
        self.changes.iter().find(|c| c.metric == metric)
    }
}

/// Relative changes of utilization, mean and p99 latency, SLA rate and total
/// cost from `baseline` to `candidate`.
pub fn compare_runs(baseline: &RunReport, candidate: &RunReport) -> Result<Comparison, ReportError> {
    if baseline.ticks != candidate.ticks {
        return Err(ReportError::TickMismatch {
            baseline: baseline.ticks,
            candidate: candidate.ticks,
        });
    }
    let pairs = [
        ("avg_cpu_util", baseline.avg_cpu_util, candidate.avg_cpu_util),
        (
            "latency_mean_ms",
            baseline.latency_mean_ms,
            candidate.latency_mean_ms,
        ),
        (
            "latency_p99_ms",
            baseline.latency_p99_ms,
            candidate.latency_p99_ms,
        ),
        ("sla_rate", baseline.sla_rate, candidate.sla_rate),
        ("total_cost", baseline.cost.total, candidate.cost.total),
    ];
    Ok(Comparison {
        baseline_policy: baseline.policy.clone(),
        candidate_policy: candidate.policy.clone(),
        changes: pairs
            .iter()
            .map(|&(m, b, c)| MetricChange::new(m, b, c))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simenv::EpisodeRow;

    pub(crate) fn row(tick: u64, cpu: f64, latency: f64) -> EpisodeRow {
        EpisodeRow {
            tick,
            demand: cpu * 160.0,
            cpu_util: cpu,
            mem_util: 0.5,
            latency_ms: latency,
            success_rate: 1.0,
            action_id: 0,
            reward: 0.0,
            violations_count: 0,
            active_vms: 80,
            provisioned_cpu: 160.0,
            storage_util: 0.4,
            net_traffic: 100.0,
        }
    }

    fn report(cpu: f64, latency: f64) -> RunReport {
        let trace = EpisodeTrace {
            policy: "p".into(),
            seed: 0,
            rows: (0..10).map(|t| row(t, cpu, latency)).collect(),
        };
        RunReport::from_trace(&trace, &ConstraintSet::default(), &CostRates::default()).unwrap()
    }

    #[test]
    fn comparison_examples() {
        let a = report(0.45, 150.0);
        let b = report(0.78, 85.0);
        let c = compare_runs(&a, &b).unwrap();
        let lat = c.get("latency_mean_ms").unwrap().relative_change_pct.unwrap();
        assert_eq!(round1(lat), -43.3);
        let util = c.get("avg_cpu_util").unwrap();
        assert_eq!(round1(util.relative_change_pct.unwrap()), 73.3);
        assert_eq!(round1(100.0 * util.absolute_change), 33.0);
        let same = compare_runs(&a, &a).unwrap();
        assert!(same.changes.iter().all(|m| m.relative_change_pct == Some(0.0)));
    }

    #[test]
    fn comparison_rejects_length_mismatch() {
        let a = report(0.5, 50.0);
        let mut b = a.clone();
        b.ticks = 3;
        assert!(matches!(
            compare_runs(&a, &b),
            Err(ReportError::TickMismatch { .. })
        ));
    }

    #[test]
    fn report_percentiles_are_ordered() {
        let trace = EpisodeTrace {
            policy: "p".into(),
            seed: 0,
            rows: (0..500).map(|t| row(t, 0.5, (t * 37 % 500) as f64)).collect(),
        };
        let r = RunReport::from_trace(&trace, &ConstraintSet::default(), &CostRates::default()).unwrap();
        assert!(r.latency_p50_ms <= r.latency_p95_ms);
        assert!(r.latency_p95_ms <= r.latency_p99_ms);
        assert!(r.latency_p99_ms <= r.latency_p999_ms);
        assert_eq!(r.format_version, "1");
        assert_eq!(r.latency_p99_ms, 494.0);
    }
}
