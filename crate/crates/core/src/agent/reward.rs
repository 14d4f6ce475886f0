use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::simenv::{ActionKind, ClusterConfig, ConstraintSet, StepObservation};

/// Reward coefficients, normalized onto the simplex on construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct RewardWeights {
    w: [f64; 3],
}

impl RewardWeights {
    pub fn new(w1: f64, w2: f64, w3: f64) -> Result<Self, AgentError> {
        let w = [w1, w2, w3];
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(AgentError::InvalidWeights(w));
        }
        let sum: f64 = w.iter().sum();
        if sum <= 0.0 {
            return Err(AgentError::InvalidWeights(w));
        }
        Ok(Self {
            w: w.map(|v| v / sum),
        })
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.w
    }

    pub fn w1(&self) -> f64 {
        self.w[0]
    }

    pub fn w2(&self) -> f64 {
        self.w[1]
    }

    pub fn w3(&self) -> f64 {
        self.w[2]
    }
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { w: [0.3, 0.5, 0.2] }
    }
}

impl TryFrom<[f64; 3]> for RewardWeights {
    type Error = AgentError;

    fn try_from(w: [f64; 3]) -> Result<Self, AgentError> {
        RewardWeights::new(w[0], w[1], w[2])
    }
}

impl From<RewardWeights> for [f64; 3] {
    fn from(w: RewardWeights) -> [f64; 3] {
        w.w
    }
}

/// `R = w1·U + w2·P − w3·C` for components already normalized to [0, 1].
pub fn reward(u: f64, p: f64, c: f64, w: &RewardWeights) -> Result<f64, AgentError> {
    for (name, v) in [("U", u), ("P", p), ("C", c)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(AgentError::OutOfRange { name, value: v });
        }
    }
    Ok(w.w1() * u + w.w2() * p - w.w3() * c)
}

/// Turns simulator observations into reward components and rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub weights: RewardWeights,
    /// Cost of one active VM for one tick.
    pub vm_cost: f64,
    /// Cost of one action level (VMs started/stopped or load units moved).
    pub action_cost: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            weights: RewardWeights::default(),
            vm_cost: 1.0,
            action_cost: 0.5,
        }
    }
}

impl RewardConfig {
    /// `(U, P, C)`: capacity-weighted utilization; `1 − min(latency / bound, 1)`;
    /// active capacity plus action cost over the largest possible tick cost.
    pub fn components(
        &self,
        obs: &StepObservation,
        cluster: &ClusterConfig,
        constraints: &ConstraintSet,
    ) -> (f64, f64, f64) {
        let u = obs.cpu_util.clamp(0.0, 1.0);
        let p = 1.0 - (obs.latency_ms / constraints.p99_latency_max).min(1.0);
        let level = match obs.action.kind {
            ActionKind::Noop => 0.0,
            _ => obs.action.level as f64,
        };
        let max = cluster.max_vms() as f64 * self.vm_cost + 5.0 * self.action_cost;
        let c = if max > 0.0 {
            ((obs.active_vms as f64 * self.vm_cost + level * self.action_cost) / max).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (u, p.max(0.0), c)
    }

    pub fn reward(&self, obs: &StepObservation, cluster: &ClusterConfig, constraints: &ConstraintSet) -> f64 {
        let (u, p, c) = self.components(obs, cluster, constraints);
        reward(u, p, c, &self.weights).expect("components are clamped to [0, 1]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let only_u = RewardWeights::new(1.0, 0.0, 0.0).unwrap();
        assert_eq!(reward(0.7, 0.3, 0.9, &only_u).unwrap(), 0.7);
        let w = RewardWeights::new(0.5, 0.3, 0.2).unwrap();
        assert!((reward(0.8, 0.9, 0.3, &w).unwrap() - 0.61).abs() < 1e-12);
        assert_eq!(reward(0.0, 0.0, 0.0, &w).unwrap(), 0.0);
        assert!(matches!(
            reward(1.2, 0.0, 0.0, &w),
            Err(AgentError::OutOfRange { name: "U", .. })
        ));
    }

    #[test]
    fn weights_normalize_and_reject_negatives() {
        let w = RewardWeights::new(2.0, 1.0, 1.0).unwrap();
        assert_eq!(w.as_array(), [0.5, 0.25, 0.25]);
        assert!(RewardWeights::new(-0.1, 1.0, 0.0).is_err());
        assert!(RewardWeights::new(0.0, 0.0, 0.0).is_err());
        let json = serde_json::to_string(&w).unwrap();
        assert_eq!(json, "[0.5,0.25,0.25]");
        assert_eq!(serde_json::from_str::<RewardWeights>(&json).unwrap(), w);
    }
}
