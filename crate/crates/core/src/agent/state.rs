//! The 42-component state: current metrics, forecast block, rolling means.

use super::AgentError;
use crate::simenv::{Action, ClusterConfig, ClusterState, ConstraintSet, Demand, StepObservation};
use crate::trace::TraceFrame;

pub const N_METRICS: usize = 14;
pub const STATE_DIM: usize = 3 * N_METRICS;
pub const ROLLING_WINDOW: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(pub [f64; STATE_DIM]);

impl StateVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn current(&self) -> &[f64] {
        &self.0[..N_METRICS]
    }

    pub fn forecast(&self) -> &[f64] {
        &self.0[N_METRICS..2 * N_METRICS]
    }

    pub fn rolling(&self) -> &[f64] {
        &self.0[2 * N_METRICS..]
    }
}

/// Lays out `[current ++ forecast ++ rolling mean]`. The current metrics are
/// the last history entry; the rolling mean covers the last 12 entries, with
/// a short history padded by repeating its first entry. The forecast is
/// truncated to 14 values or padded by repeating its last value.
pub fn encode_state(history: &[[f64; N_METRICS]], forecast: &[f64]) -> Result<StateVector, AgentError> {
    let mut out = [0.0; STATE_DIM];
    let Some(current) = history.last() else {
        return Err(AgentError::EmptyHistory);
    };
    out[..N_METRICS].copy_from_slice(current);
    let fill = forecast.last().copied().unwrap_or(current[0]);
    for k in 0..N_METRICS {
        out[N_METRICS + k] = forecast.get(k).copied().unwrap_or(fill);
    }
    let recent = &history[history.len().saturating_sub(ROLLING_WINDOW)..];
    let pad = ROLLING_WINDOW - recent.len();
    for j in 0..N_METRICS {
        let sum: f64 = recent.iter().map(|m| m[j]).sum::<f64>() + pad as f64 * recent[0][j];
        out[2 * N_METRICS + j] = sum / ROLLING_WINDOW as f64;
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(AgentError::NonFiniteState);
    }
    Ok(StateVector(out))
}

/// What a tick looks like before anything ran.
pub fn idle_observation(state: &ClusterState, cluster: &ClusterConfig) -> StepObservation {
    StepObservation {
        tick: state.tick,
        demand: Demand::default(),
        served: 0.0,
        dropped: 0.0,
        node_utils: state.node_utils(),
        cpu_util: 0.0,
        mem_util: 0.0,
        storage_util: 0.0,
        net_traffic: 0.0,
        latency_ms: cluster.base_latency_ms,
        success_rate: 1.0,
        imbalance: 0.0,
        active_vms: state.active_vms(),
        pending_vms: state.pending_vms(),
        provisioned_cpu: state.provisioned_cpu(),
        action: Action::NOOP,
        infeasible: false,
    }
}

/// Normalized per-tick metrics, all roughly within [0, 1]:
/// utilization (cpu, mem, storage), demand / provisioned / pending capacity
/// as fractions of the cluster maximum, drop fraction, imbalance, latency
/// over its bound, success rate, infeasible-action flag, network traffic,
/// and time of day.
pub fn observation_metrics(
    obs: &StepObservation,
    frame: &TraceFrame,
    cluster: &ClusterConfig,
    constraints: &ConstraintSet,
) -> [f64; N_METRICS] {
    let max_cap = cluster.max_capacity();
    let tick = (obs.tick as usize).min(frame.len().saturating_sub(1));
    let hour = |name| {
        if frame.is_empty() {
            0.0
        } else {
            frame.value(tick, name).unwrap_or(0.0)
        }
    };
    let drop_frac = if obs.demand.cpu > 0.0 {
        obs.dropped / obs.demand.cpu
    } else {
        0.0
    };
    [
        obs.cpu_util,
        obs.mem_util,
        obs.storage_util,
        (obs.demand.cpu / max_cap).min(2.0),
        obs.provisioned_cpu / max_cap,
        obs.pending_vms as f64 * cluster.vm_cpu / max_cap,
        drop_frac,
        obs.imbalance,
        (obs.latency_ms / constraints.p99_latency_max).min(2.0),
        obs.success_rate,
        if obs.infeasible { 1.0 } else { 0.0 },
        (obs.net_traffic / 1000.0).min(2.0),
        hour("hour_sin"),
        hour("hour_cos"),
    ]
}

/// State seen by a policy at the start of a tick: the metric history of the
/// episode so far and forecast demand over the capacity already committed
/// (active plus pending VMs).
pub fn encode_context(
    history: &[StepObservation],
    forecast: &[f64],
    state: &ClusterState,
    frame: &TraceFrame,
    cluster: &ClusterConfig,
    constraints: &ConstraintSet,
) -> Result<StateVector, AgentError> {
    let recent = &history[history.len().saturating_sub(ROLLING_WINDOW)..];
    let mut metrics: Vec<[f64; N_METRICS]> = recent
        .iter()
        .map(|o| observation_metrics(o, frame, cluster, constraints))
        .collect();
    if metrics.is_empty() {
        metrics.push(observation_metrics(
            &idle_observation(state, cluster),
            frame,
            cluster,
            constraints,
        ));
    }
    let committed = (state.active_vms() + state.pending_vms()) as f64 * cluster.vm_cpu;
    let relative: Vec<f64> = forecast
        .iter()
        .map(|d| {
            if committed > 0.0 {
                (d / committed).min(2.0)
            } else {
                2.0
            }
        })
        .collect();
    encode_state(&metrics, &relative)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_inputs_give_constant_state() {
        let c = 0.37;
        let history = vec![[c; N_METRICS]; 20];
        let s = encode_state(&history, &[c; 6]).unwrap();
        assert!(s.as_slice().iter().all(|&v| (v - c).abs() < 1e-15));
        assert_eq!(s.as_slice().len(), 42);
    }

    #[test]
    fn rolling_block_averages_last_twelve() {
        let history: Vec<[f64; N_METRICS]> = (0..30)
            .map(|t| std::array::from_fn(|j| (t * 10 + j) as f64))
            .collect();
        let s = encode_state(&history, &[1.0, 2.0]).unwrap();
        for j in 0..N_METRICS {
            let hand: f64 = (18..30).map(|t| (t * 10 + j) as f64).sum::<f64>() / 12.0;
            assert!((s.rolling()[j] - hand).abs() < 1e-12);
        }
        assert_eq!(&s.forecast()[..3], &[1.0, 2.0, 2.0]);
        assert_eq!(s.current()[0], 290.0);
    }

    #[test]
    fn short_history_pads_with_first_tick() {
        let history = vec![[1.0; N_METRICS], [4.0; N_METRICS]];
        let s = encode_state(&history, &[]).unwrap();
        // Ten copies of 1 plus {1, 4}.
        assert!((s.rolling()[0] - 15.0 / 12.0).abs() < 1e-12);
        assert!(encode_state(&[], &[1.0]).is_err());
    }
}
