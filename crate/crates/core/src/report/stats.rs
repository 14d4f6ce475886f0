use serde::{Deserialize, Serialize};

use super::ReportError;
use crate::trace::MetricSeries;

/// Nearest-rank percentile: the `⌈p·n⌉`-th smallest value (1-based).
pub fn percentile(values: &[f64], p: f64) -> Result<f64, ReportError> {
    if values.is_empty() {
        return Err(ReportError::Empty("percentile input"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(ReportError::InvalidArgument(format!(
            "percentile p = {p} outside (0, 1]"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // Guard against p·n landing a hair above an integer through rounding.
    let rank = ((p * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    Ok(sorted[rank - 1])
}

/// Fraction of latencies at or below `bound`.
pub fn sla_rate(latencies: &[f64], bound: f64) -> Result<f64, ReportError> {
    if latencies.is_empty() {
        return Err(ReportError::Empty("latency list"));
    }
    Ok(latencies.iter().filter(|&&l| l <= bound).count() as f64 / latencies.len() as f64)
}

/// Population standard deviation over mean.
pub fn coefficient_of_variation(values: &[f64]) -> Result<f64, ReportError> {
    if values.is_empty() {
        return Err(ReportError::Empty("sample"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return Err(ReportError::InvalidArgument(
            "coefficient of variation of zero-mean sample".into(),
        ));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt() / mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub tick: usize,
    pub value: f64,
}

/// Ticks where the series moves from at or below `bound` to above it.
pub fn threshold_crossing_events(series: &MetricSeries, bound: f64) -> Vec<CrossingEvent> {
    series
        .values
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] <= bound && w[1] > bound)
        .map(|(i, w)| CrossingEvent {
            tick: i + 1,
            value: w[1],
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitRate {
    pub events: usize,
    /// Events late enough that some forecast could warn `lead` ticks ahead.
    pub eligible: usize,
    pub hits: usize,
}

impl HitRate {
    pub fn rate(&self) -> Option<f64> {
        (self.eligible > 0).then(|| self.hits as f64 / self.eligible as f64)
    }
}

/// Scores early warning: `forecasts[s][k]` predicts the series at tick
/// `s + k` from data before `s`. A crossing at `t` is hit when some forecast
/// issued at `s ≤ t − lead` already predicted a value above `bound` for `t`.
pub fn early_warning_hit_rate(
    actual: &MetricSeries,
    forecasts: &[Vec<f64>],
    bound: f64,
    lead: usize,
) -> HitRate {
    let events = threshold_crossing_events(actual, bound);
    let mut out = HitRate {
        events: events.len(),
        eligible: 0,
        hits: 0,
    };
    for e in &events {
        let Some(latest) = e.tick.checked_sub(lead) else {
            continue;
        };
        let issued = (0..=latest.min(forecasts.len().saturating_sub(1)))
            .rev()
            .take_while(|&s| e.tick - s < forecasts[s].len());
        let mut any = false;
        let mut hit = false;
        for s in issued {
            any = true;
            if forecasts[s][e.tick - s] > bound {
                hit = true;
                break;
            }
        }
        if any {
            out.eligible += 1;
            out.hits += hit as usize;
        }
    }
    out
}
