use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ClusterState, SimError};

/// Slack applied at every bound so values that are equal to a bound up to
/// floating-point representation are judged as equal.
pub const BOUNDARY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstraintSet {
    /// Node CPU utilization must not exceed this.
    pub cpu_max: f64,
    /// Node memory utilization must stay below this.
    pub mem_max: f64,
    /// Storage I/O utilization must stay below this.
    pub storage_io_max: f64,
    /// Latency must stay below this, ms.
    pub p99_latency_max: f64,
    /// Request success rate must exceed this.
    pub api_success_min: f64,
    /// CPU utilization spread between nodes must not exceed this.
    pub max_node_imbalance: f64,
}

impl Default for ConstraintSet {
    fn default() -> Self {
        Self {
            cpu_max: 0.85,
            mem_max: 0.90,
            storage_io_max: 0.80,
            p99_latency_max: 200.0,
            api_success_min: 0.999,
            max_node_imbalance: 0.20,
        }
    }
}

impl ConstraintSet {
    pub fn validate(&self) -> Result<(), SimError> {
        let fractions = [
            ("cpu_max", self.cpu_max),
            ("mem_max", self.mem_max),
            ("storage_io_max", self.storage_io_max),
            ("api_success_min", self.api_success_min),
            ("max_node_imbalance", self.max_node_imbalance),
        ];
        for (name, v) in fractions {
            if !(v > 0.0 && v <= 1.0) {
                return Err(SimError::InvalidConfig(format!("{name} = {v} outside (0, 1]")));
            }
        }
        if !(self.p99_latency_max > 0.0 && self.p99_latency_max.is_finite()) {
            return Err(SimError::InvalidConfig("p99_latency_max must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    CpuMax,
    MemMax,
    StorageIoMax,
    P99LatencyMax,
    ApiSuccessMin,
    MaxNodeImbalance,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constraint::CpuMax => "cpu_max",
            Constraint::MemMax => "mem_max",
            Constraint::StorageIoMax => "storage_io_max",
            Constraint::P99LatencyMax => "p99_latency_max",
            Constraint::ApiSuccessMin => "api_success_min",
            Constraint::MaxNodeImbalance => "max_node_imbalance",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: Constraint,
    pub observed: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub violations: Vec<Violation>,
}

impl ConstraintReport {
    pub fn is_satisfied(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violated(&self, c: Constraint) -> bool {
        self.violations.iter().any(|v| v.constraint == c)
    }

    /// Fraction of reports with at least one violation.
    pub fn violation_rate(reports: &[ConstraintReport]) -> f64 {
        if reports.is_empty() {
            return 0.0;
        }
        reports.iter().filter(|r| !r.is_satisfied()).count() as f64 / reports.len() as f64
    }
}

/// Tests the six constraints on one state. Per-node limits report the worst
/// node; imbalance is the largest CPU utilization gap between nodes hosting
/// VMs.
pub fn check_constraints(state: &ClusterState, c: &ConstraintSet) -> ConstraintReport {
    let hosts = || state.nodes.iter().filter(|n| n.vm_count > 0);
    let max_of = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0f64, f64::max);
    let cpu = max_of(&mut hosts().map(|n| n.cpu_util(state.vm_cpu)));
    let mem = max_of(&mut hosts().map(|n| n.mem_util(state.vm_mem)));
    let io = max_of(&mut hosts().map(|n| n.storage_io_util));
    let imbalance = state.imbalance();
    let t = BOUNDARY_TOLERANCE;

    let mut violations = Vec::new();
    let mut add = |constraint, observed, bound, violated: bool| {
        if violated {
            violations.push(Violation {
                constraint,
                observed,
                bound,
            });
        }
    };
    add(Constraint::CpuMax, cpu, c.cpu_max, cpu > c.cpu_max + t);
    add(Constraint::MemMax, mem, c.mem_max, mem >= c.mem_max - t);
    add(
        Constraint::StorageIoMax,
        io,
        c.storage_io_max,
        io >= c.storage_io_max - t,
    );
    let lat = state.last_latency_ms;
    add(
        Constraint::P99LatencyMax,
        lat,
        c.p99_latency_max,
        lat >= c.p99_latency_max - t,
    );
    let ok = state.request_success_rate;
    add(
        Constraint::ApiSuccessMin,
        ok,
        c.api_success_min,
        ok <= c.api_success_min + t,
    );
    add(
        Constraint::MaxNodeImbalance,
        imbalance,
        c.max_node_imbalance,
        imbalance > c.max_node_imbalance + t,
    );
    ConstraintReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simenv::{init_cluster, ClusterConfig};

    fn cluster(utils: &[f64]) -> ClusterState {
        let cfg = ClusterConfig {
            n_nodes: utils.len(),
            initial_vms: 4 * utils.len() as u32,
            ..ClusterConfig::default()
        };
        let mut s = init_cluster(&cfg).unwrap();
        for (n, u) in s.nodes.iter_mut().zip(utils) {
            n.cpu_used = u * 8.0;
        }
        s
    }

    #[test]
    fn defaults_match_stated_bounds() {
        let c = ConstraintSet::default();
        assert_eq!(
            (
                c.cpu_max,
                c.mem_max,
                c.storage_io_max,
                c.p99_latency_max,
                c.api_success_min,
                c.max_node_imbalance
            ),
            (0.85, 0.90, 0.80, 200.0, 0.999, 0.20)
        );
        c.validate().unwrap();
        assert!(ConstraintSet { cpu_max: 1.5, ..c }.validate().is_err());
    }

    #[test]
    fn idle_cluster_is_clean() {
        let s = init_cluster(&ClusterConfig::default()).unwrap();
        assert!(check_constraints(&s, &ConstraintSet::default()).is_satisfied());
    }

    #[test]
    fn hot_node_violates_cpu() {
        let r = check_constraints(&cluster(&[0.9, 0.8]), &ConstraintSet::default());
        assert_eq!(
            r.violations,
            vec![Violation {
                constraint: Constraint::CpuMax,
                observed: 0.9,
                bound: 0.85
            }]
        );
    }

    #[test]
    fn imbalance_is_pairwise_spread() {
        let r = check_constraints(&cluster(&[0.5, 0.8]), &ConstraintSet::default());
        assert!(r.violated(Constraint::MaxNodeImbalance));
        let v = r
            .violations
            .iter()
            .find(|v| v.constraint == Constraint::MaxNodeImbalance)
            .unwrap();
        assert!((v.observed - 0.3).abs() < 1e-12);
        let ok = check_constraints(&cluster(&[0.6, 0.8]), &ConstraintSet::default());
        assert!(ok.is_satisfied());
    }

    #[test]
    fn qos_bounds() {
        let mut s = cluster(&[0.5]);
        s.last_latency_ms = 200.0;
        s.request_success_rate = 0.999;
        let r = check_constraints(&s, &ConstraintSet::default());
        assert!(r.violated(Constraint::P99LatencyMax));
        assert!(r.violated(Constraint::ApiSuccessMin));
        assert_eq!(
            ConstraintReport::violation_rate(&[r, ConstraintReport::default()]),
            0.5
        );
    }
}
