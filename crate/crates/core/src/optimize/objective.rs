use serde::{Deserialize, Serialize};

use crate::simenv::{
    latency_model, Action, ClusterConfig, ConstraintSet, Decision, EpisodeTrace, Policy, PolicyContext,
};

/// Weights of the objective, kept on the simplex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl ObjectiveWeights {
    /// Normalizes non-negative weights; `None` for negative, non-finite or
    /// all-zero input.
    pub fn new(w1: f64, w2: f64, w3: f64) -> Option<Self> {
        let w = [w1, w2, w3];
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return None;
        }
        let s: f64 = w.iter().sum();
        (s > 0.0).then(|| Self {
            w1: w1 / s,
            w2: w2 / s,
            w3: w3 / s,
        })
    }

    pub fn equal() -> Self {
        Self {
            w1: 1.0 / 3.0,
            w2: 1.0 / 3.0,
            w3: 1.0 / 3.0,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.w1, self.w2, self.w3]
    }
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self::equal()
    }
}

/// Utilization, normalized cost and service quality, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveInputs {
    pub u: f64,
    pub c: f64,
    pub q: f64,
}

/// `F = w1·U − w2·C + w3·Q`.
pub fn objective_f(x: &ObjectiveInputs, w: &ObjectiveWeights) -> f64 {
    w.w1 * x.u - w.w2 * x.c + w.w3 * x.q
}

/// Episode-level inputs: mean CPU utilization, mean provisioned capacity
/// over the cluster maximum, and the share of ticks within the latency bound.
pub fn episode_objective_inputs(
    trace: &EpisodeTrace,
    cluster: &ClusterConfig,
    constraints: &ConstraintSet,
) -> ObjectiveInputs {
    let n = trace.rows.len().max(1) as f64;
    let max_cap = cluster.max_capacity();
    ObjectiveInputs {
        u: trace.rows.iter().map(|r| r.cpu_util.clamp(0.0, 1.0)).sum::<f64>() / n,
        c: trace
            .rows
            .iter()
            .map(|r| (r.provisioned_cpu / max_cap).clamp(0.0, 1.0))
            .sum::<f64>()
            / n,
        q: if trace.rows.is_empty() {
            1.0
        } else {
            trace
                .rows
                .iter()
                .filter(|r| r.latency_ms < constraints.p99_latency_max)
                .count() as f64
                / n
        },
    }
}

/// One-step lookahead: picks the expand/contract/noop action whose predicted
/// capacity maximizes `F` for the forecast demand when that capacity becomes
/// active. Service quality is predicted as `1 − min(latency / bound, 1)`.
#[derive(Debug, Clone)]
pub struct ObjectivePolicy {
    pub weights: ObjectiveWeights,
}

impl ObjectivePolicy {
    fn predicted(&self, demand: f64, vms: u32, ctx: &PolicyContext<'_>) -> f64 {
        let cap = vms as f64 * ctx.cluster.vm_cpu;
        let max_cap = ctx.cluster.max_capacity();
        let (u, q) = if cap <= 0.0 {
            (if demand > 0.0 { 1.0 } else { 0.0 }, 0.0)
        } else if demand > cap {
            (1.0, 0.0)
        } else {
            let u = demand / cap;
            let lat = latency_model(u, ctx.cluster.base_latency_ms);
            (u, 1.0 - (lat / ctx.constraints.p99_latency_max).min(1.0))
        };
        let inputs = ObjectiveInputs {
            u,
            c: cap / max_cap,
            q,
        };
        objective_f(&inputs, &self.weights)
    }
}

impl Policy for ObjectivePolicy {
    fn name(&self) -> String {
        "objective_greedy".into()
    }

    fn decide(&mut self, ctx: &PolicyContext<'_>) -> Decision {
        let active = ctx.state.active_vms();
        let committed = active + ctx.state.pending_vms();
        let lead = ctx.cluster.provisioning_delay as usize;
        let at = |k: usize| {
            ctx.forecast
                .get(k)
                .or(ctx.forecast.last())
                .copied()
                .unwrap_or(0.0)
        };
        let mut best = (Action::NOOP, self.predicted(at(lead), committed, ctx));
        for level in 1..=5u8 {
            let k = level as u32;
            if committed + k <= ctx.cluster.max_vms() {
                let v = self.predicted(at(lead), committed + k, ctx);
                if v > best.1 {
                    best = (Action::expand(level), v);
                }
            }
            if active >= ctx.cluster.min_vms + k {
                let v = self.predicted(at(0), committed - k, ctx);
                if v > best.1 {
                    best = (Action::contract(level), v);
                }
            }
        }
        Decision::action(best.0.id())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let only_u = ObjectiveWeights::new(1.0, 0.0, 0.0).unwrap();
        let x = ObjectiveInputs {
            u: 0.6,
            c: 0.9,
            q: 0.1,
        };
        assert_eq!(objective_f(&x, &only_u), 0.6);
        let w = ObjectiveWeights::new(0.4, 0.3, 0.3).unwrap();
        let x = ObjectiveInputs {
            u: 0.7,
            c: 0.4,
            q: 0.99,
        };
        assert!((objective_f(&x, &w) - 0.457).abs() < 1e-12);
        let zero = ObjectiveInputs {
            u: 0.0,
            c: 0.0,
            q: 0.0,
        };
        assert_eq!(objective_f(&zero, &w), 0.0);
        assert!(ObjectiveWeights::new(0.0, 0.0, 0.0).is_none());
    }
}
