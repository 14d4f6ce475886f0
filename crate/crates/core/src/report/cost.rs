use serde::{Deserialize, Serialize};

use super::ReportError;
use crate::simenv::EpisodeTrace;

/// Per-unit prices. The defaults put a static 30-day run on the reference
/// workload near the shape of a typical monthly bill: server ≫ bandwidth >
/// storage, plus a flat labor charge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostRates {
    /// Per provisioned core per tick.
    pub server: f64,
    /// Per unit of network traffic.
    pub bandwidth: f64,
    /// Per unit of storage utilization per tick.
    pub storage: f64,
    /// Flat per run.
    pub labor: f64,
}

impl Default for CostRates {
    fn default() -> Self {
        Self {
            server: 6.0e-5,
            bandwidth: 9.0e-6,
            storage: 6.0e-3,
            labor: 45.0,
        }
    }
}

impl CostRates {
    pub fn validate(&self) -> Result<(), ReportError> {
        for (name, v) in [
            ("server", self.server),
            ("bandwidth", self.bandwidth),
            ("storage", self.storage),
            ("labor", self.labor),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ReportError::InvalidArgument(format!(
                    "cost rate {name} = {v} must be >= 0"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostBreakdown {
    pub server: f64,
    pub bandwidth: f64,
    pub storage: f64,
    pub labor: f64,
    pub total: f64,
}

pub fn cost_of_run(trace: &EpisodeTrace, rates: &CostRates) -> CostBreakdown {
    let sum = |f: fn(&crate::simenv::EpisodeRow) -> f64| trace.rows.iter().map(f).sum::<f64>();
    let server = sum(|r| r.provisioned_cpu) * rates.server;
    let bandwidth = sum(|r| r.net_traffic) * rates.bandwidth;
    let storage = sum(|r| r.storage_util) * rates.storage;
    let labor = rates.labor;
    CostBreakdown {
        server,
        bandwidth,
        storage,
        labor,
        total: server + bandwidth + storage + labor,
    }
}

/// `100 · (before − after) / before`, at full precision.
pub fn savings_rate(before: f64, after: f64) -> Result<f64, ReportError> {
    if before.is_nan() || before <= 0.0 {
        return Err(ReportError::InvalidArgument(format!(
            "savings base {before} must be > 0"
        )));
    }
    Ok(100.0 * (before - after) / before)
}

/// Rounds half away from zero to one decimal, for display.
pub fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::tests::row;

    fn trace() -> EpisodeTrace {
        let mut rows: Vec<_> = (0..3).map(|t| row(t, 0.5, 10.0)).collect();
        rows[0].provisioned_cpu = 10.0;
        rows[1].provisioned_cpu = 12.0;
        rows[2].provisioned_cpu = 8.0;
        rows[0].net_traffic = 1.0;
        rows[1].net_traffic = 2.0;
        rows[2].net_traffic = 4.0;
        rows[0].storage_util = 0.5;
        rows[1].storage_util = 0.25;
        rows[2].storage_util = 0.125;
        EpisodeTrace {
            policy: "hand".into(),
            seed: 0,
            rows,
        }
    }

    #[test]
    fn hand_summed_trace() {
        let unit = CostRates {
            server: 1.0,
            bandwidth: 1.0,
            storage: 1.0,
            labor: 1.0,
        };
        let c = cost_of_run(&trace(), &unit);
        assert_eq!(
            (c.server, c.bandwidth, c.storage, c.labor),
            (30.0, 7.0, 0.875, 1.0)
        );
        assert_eq!(c.total, 38.875);
        let zero = CostRates {
            server: 0.0,
            bandwidth: 0.0,
            storage: 0.0,
            labor: 0.0,
        };
        assert_eq!(cost_of_run(&trace(), &zero).total, 0.0);
        let double = cost_of_run(
            &trace(),
            &CostRates {
                server: 2.0,
                ..unit.clone()
            },
        );
        assert_eq!(double.server, 60.0);
        assert_eq!(
            (double.bandwidth, double.storage, double.labor),
            (7.0, 0.875, 1.0)
        );
    }

    #[test]
    fn savings_examples() {
        assert_eq!(round1(savings_rate(188.0, 138.0).unwrap()), 26.6);
        assert_eq!(round1(savings_rate(85.0, 57.0).unwrap()), 32.9);
        assert_eq!(savings_rate(10.0, 10.0).unwrap(), 0.0);
        assert!(savings_rate(0.0, 1.0).is_err());
    }
}
