use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AgentError, QNetwork, RewardWeights};
use crate::nn::{Mlp, Parameters, TensorRecord};
use crate::rng;

pub const AGENT_CHECKPOINT_VERSION: u32 = 1;

/// Q-network tensors plus the training settings that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentCheckpoint {
    pub format_version: u32,
    pub layer_sizes: Vec<usize>,
    pub epsilon_final: f64,
    pub gamma: f64,
    pub weights: RewardWeights,
    pub tensors: Vec<TensorRecord>,
}

pub fn to_agent_json(q: &QNetwork, epsilon_final: f64, gamma: f64, weights: RewardWeights) -> String {
    let ck = AgentCheckpoint {
        format_version: AGENT_CHECKPOINT_VERSION,
        layer_sizes: q.sizes(),
        epsilon_final,
        gamma,
        weights,
        tensors: q.to_records(),
    };
    serde_json::to_string_pretty(&ck).expect("checkpoint serializes")
}

pub fn parse_agent_checkpoint(text: &str) -> Result<(QNetwork, AgentCheckpoint), AgentError> {
    let err = |m: String| AgentError::Checkpoint(m);
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
    match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == AGENT_CHECKPOINT_VERSION as u64 => {}
        Some(v) => return Err(err(format!("unsupported format_version {v}"))),
        None => return Err(err("missing format_version".into())),
    }
    let ck: AgentCheckpoint = serde_json::from_value(value).map_err(|e| err(e.to_string()))?;
    let sizes = &ck.layer_sizes;
    if sizes.len() < 2 || sizes.iter().any(|&s| s == 0 || s > 1 << 14) {
        return Err(err(format!("invalid layer sizes {sizes:?}")));
    }
    if !(0.0..1.0).contains(&ck.gamma) || !(0.0..=1.0).contains(&ck.epsilon_final) {
        return Err(err("gamma or epsilon_final out of range".into()));
    }
    let declared: usize = ck.tensors.iter().map(|t| t.values.len()).sum();
    let expected: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    if declared != expected || ck.tensors.len() != 2 * (sizes.len() - 1) {
        return Err(err(format!(
            "expected {expected} values in {} tensors",
            2 * (sizes.len() - 1)
        )));
    }
    let mut q = QNetwork {
        mlp: Mlp::init(sizes, &mut rng::seeded(0)),
    };
    q.load_records(&ck.tensors).map_err(err)?;
    Ok((q, ck))
}

pub fn save_agent(
    path: impl AsRef<Path>,
    q: &QNetwork,
    epsilon_final: f64,
    gamma: f64,
    weights: RewardWeights,
) -> Result<(), AgentError> {
    let path = path.as_ref();
    std::fs::write(path, to_agent_json(q, epsilon_final, gamma, weights) + "\n").map_err(|source| {
        AgentError::Io {
            path: path.display().to_string(),
            source,
        }
    })
}

pub fn load_agent(path: impl AsRef<Path>) -> Result<(QNetwork, AgentCheckpoint), AgentError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| AgentError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_agent_checkpoint(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let q = QNetwork::standard(&mut rng::seeded(4));
        let w = RewardWeights::new(0.2, 0.5, 0.3).unwrap();
        let text = to_agent_json(&q, 0.05, 0.95, w);
        let (back, ck) = parse_agent_checkpoint(&text).unwrap();
        assert_eq!(back, q);
        assert_eq!((ck.epsilon_final, ck.gamma, ck.weights), (0.05, 0.95, w));
        assert!(
            parse_agent_checkpoint(&text.replace("\"format_version\": 1", "\"format_version\": 7")).is_err()
        );
        assert!(parse_agent_checkpoint("[]").is_err());
    }
}
