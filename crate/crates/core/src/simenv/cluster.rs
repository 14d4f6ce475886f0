use serde::{Deserialize, Serialize};

use super::{Action, ActionKind, SimError};
use crate::trace::TraceFrame;

/// Cluster shape and the simulator's behavioural constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub n_nodes: usize,
    /// Cores per node.
    pub node_cpu: f64,
    /// GB per node.
    pub node_mem: f64,
    pub vm_cpu: f64,
    pub vm_mem: f64,
    pub initial_vms: u32,
    pub min_vms: u32,
    /// Latency at zero load, ms.
    pub base_latency_ms: f64,
    /// Ticks between an expand action and its VMs becoming active.
    pub provisioning_delay: u64,
    /// Fraction of each node's previous load that stays on it next tick.
    pub stickiness: f64,
    /// Cores of work per request/s.
    pub work_per_request: f64,
    /// Cores moved per migration level.
    pub migration_unit: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            n_nodes: 20,
            node_cpu: 8.0,
            node_mem: 32.0,
            vm_cpu: 2.0,
            vm_mem: 8.0,
            initial_vms: 80,
            min_vms: 4,
            base_latency_ms: 12.4,
            provisioning_delay: 1,
            stickiness: 0.3,
            work_per_request: 0.16,
            migration_unit: 1.0,
        }
    }
}

impl ClusterConfig {
    pub fn vms_per_node(&self) -> u32 {
        let by_cpu = (self.node_cpu / self.vm_cpu).floor();
        let by_mem = (self.node_mem / self.vm_mem).floor();
        by_cpu.min(by_mem).max(0.0) as u32
    }

    pub fn max_vms(&self) -> u32 {
        self.vms_per_node() * self.n_nodes as u32
    }

    /// Cores available with every VM slot filled.
    pub fn max_capacity(&self) -> f64 {
        self.max_vms() as f64 * self.vm_cpu
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.into()));
        let positive = [
            self.node_cpu,
            self.node_mem,
            self.vm_cpu,
            self.vm_mem,
            self.base_latency_ms,
            self.migration_unit,
        ];
        if self.n_nodes == 0 {
            return bad("n_nodes must be ≥ 1");
        }
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("capacities, latency and migration unit must be positive");
        }
        if !(self.work_per_request.is_finite() && self.work_per_request >= 0.0) {
            return bad("work_per_request must be ≥ 0");
        }
        if !(0.0..=1.0).contains(&self.stickiness) {
            return bad("stickiness must be in [0, 1]");
        }
        if self.vms_per_node() == 0 {
            return bad("a VM does not fit on a node");
        }
        if self.min_vms > self.max_vms() {
            return bad("min_vms exceeds cluster capacity");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub node_id: usize,
    pub cpu_capacity: f64,
    pub mem_capacity: f64,
    pub cpu_used: f64,
    pub mem_used: f64,
    pub storage_io_util: f64,
    pub vm_count: u32,
}

impl NodeState {
    pub fn provisioned_cpu(&self, vm_cpu: f64) -> f64 {
        self.vm_count as f64 * vm_cpu
    }

    /// CPU used over provisioned VM capacity; 0 with no VMs.
    pub fn cpu_util(&self, vm_cpu: f64) -> f64 {
        let p = self.provisioned_cpu(vm_cpu);
        if p > 0.0 {
            self.cpu_used / p
        } else {
            0.0
        }
    }

    pub fn mem_util(&self, vm_mem: f64) -> f64 {
        let p = self.vm_count as f64 * vm_mem;
        if p > 0.0 {
            self.mem_used / p
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reservation {
    pub activation_tick: u64,
    pub vms: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    /// Number of ticks already simulated; the next step processes this tick.
    pub tick: u64,
    pub nodes: Vec<NodeState>,
    pub pending_reservations: Vec<Reservation>,
    pub last_latency_ms: f64,
    pub request_success_rate: f64,
    pub vm_cpu: f64,
    pub vm_mem: f64,
}

impl ClusterState {
    pub fn active_vms(&self) -> u32 {
        self.nodes.iter().map(|n| n.vm_count).sum()
    }

    pub fn pending_vms(&self) -> u32 {
        self.pending_reservations.iter().map(|r| r.vms).sum()
    }

    pub fn provisioned_cpu(&self) -> f64 {
        self.active_vms() as f64 * self.vm_cpu
    }

    pub fn node_utils(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.cpu_util(self.vm_cpu)).collect()
    }

    /// Served load over provisioned capacity.
    pub fn cpu_util(&self) -> f64 {
        let p = self.provisioned_cpu();
        if p > 0.0 {
            self.nodes.iter().map(|n| n.cpu_used).sum::<f64>() / p
        } else {
            0.0
        }
    }

    /// Largest CPU utilization difference between nodes that host VMs.
    pub fn imbalance(&self) -> f64 {
        let utils: Vec<f64> = self
            .nodes
            .iter()
            .filter(|n| n.vm_count > 0)
            .map(|n| n.cpu_util(self.vm_cpu))
            .collect();
        let max = utils.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = utils.iter().cloned().fold(f64::INFINITY, f64::min);
        if utils.len() < 2 {
            0.0
        } else {
            max - min
        }
    }

    fn place_vms(&mut self, mut k: u32, per_node: u32) -> u32 {
        let mut placed = 0;
        while k > 0 {
            let target = self
                .nodes
                .iter_mut()
                .filter(|n| n.vm_count < per_node)
                .min_by_key(|n| n.vm_count);
            match target {
                Some(n) => n.vm_count += 1,
                None => break,
            }
            k -= 1;
            placed += 1;
        }
        placed
    }

    fn remove_vms(&mut self, k: u32) {
        for _ in 0..k {
            // Fullest node first; on ties the highest index.
            if let Some(n) = self
                .nodes
                .iter_mut()
                .filter(|n| n.vm_count > 0)
                .max_by_key(|n| n.vm_count)
            {
                n.vm_count -= 1;
                let cap = n.vm_count as f64 * self.vm_cpu;
                n.cpu_used = n.cpu_used.min(cap);
            }
        }
    }
}

/// VMs spread round-robin over the nodes, all utilizations zero.
pub fn init_cluster(config: &ClusterConfig) -> Result<ClusterState, SimError> {
    config.validate()?;
    if config.initial_vms > config.max_vms() {
        return Err(SimError::OverCapacity {
            requested: config.initial_vms,
            capacity: config.max_vms(),
        });
    }
    let mut nodes: Vec<NodeState> = (0..config.n_nodes)
        .map(|node_id| NodeState {
            node_id,
            cpu_capacity: config.node_cpu,
            mem_capacity: config.node_mem,
            cpu_used: 0.0,
            mem_used: 0.0,
            storage_io_util: 0.0,
            vm_count: 0,
        })
        .collect();
    for v in 0..config.initial_vms as usize {
        nodes[v % config.n_nodes].vm_count += 1;
    }
    Ok(ClusterState {
        tick: 0,
        nodes,
        pending_reservations: Vec::new(),
        last_latency_ms: config.base_latency_ms,
        request_success_rate: 1.0,
        vm_cpu: config.vm_cpu,
        vm_mem: config.vm_mem,
    })
}

/// `L0 / (1 − min(u, 0.99))`.
pub fn latency_model(utilization: f64, base_latency_ms: f64) -> f64 {
    base_latency_ms / (1.0 - utilization.clamp(0.0, 0.99))
}

/// What one tick of the trace asks of the cluster.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Demand {
    /// Cores of work.
    pub cpu: f64,
    /// Fraction of provisioned memory in use.
    pub mem_fraction: f64,
    /// Storage I/O utilization, taken directly from the trace.
    pub storage_io: f64,
    /// Network traffic (in + out), trace units.
    pub net: f64,
}

/// Demand at `tick`: `request_rate × work_per_request` cores, with memory,
/// storage and network taken from their trace columns.
pub fn offered_load(frame: &TraceFrame, tick: usize, config: &ClusterConfig) -> Result<Demand, SimError> {
    if tick >= frame.len() {
        return Err(SimError::TickOutOfRange {
            tick,
            len: frame.len(),
        });
    }
    let v = |name: &str| frame.value(tick, name);
    Ok(Demand {
        cpu: (v("request_rate")? * config.work_per_request).max(0.0),
        mem_fraction: v("mem_util")?.clamp(0.0, 1.0),
        storage_io: v("storage_util")?.clamp(0.0, 1.0),
        net: (v("net_in")? + v("net_out")?).max(0.0),
    })
}

/// Everything observable after one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepObservation {
    pub tick: u64,
    pub demand: Demand,
    pub served: f64,
    pub dropped: f64,
    pub node_utils: Vec<f64>,
    pub cpu_util: f64,
    pub mem_util: f64,
    pub storage_util: f64,
    pub net_traffic: f64,
    pub latency_ms: f64,
    pub success_rate: f64,
    pub imbalance: f64,
    pub active_vms: u32,
    pub pending_vms: u32,
    pub provisioned_cpu: f64,
    pub action: Action,
    /// The action (or reservation) could not be carried out and was skipped.
    pub infeasible: bool,
}

/// One tick with a plain action.
pub fn step(
    state: &ClusterState,
    demand: &Demand,
    action: Action,
    config: &ClusterConfig,
) -> (ClusterState, StepObservation) {
    step_decision(state, demand, action, None, config)
}

/// One tick: matured reservations activate, the action (and an optional
/// advance reservation) applies, then demand is routed. A share of each
/// node's previous load stays resident; fresh demand fills nodes in
/// proportion to their free provisioned capacity and any excess is dropped.
pub fn step_decision(
    state: &ClusterState,
    demand: &Demand,
    action: Action,
    reservation: Option<Reservation>,
    config: &ClusterConfig,
) -> (ClusterState, StepObservation) {
    let mut s = state.clone();
    let now = s.tick;
    let per_node = config.vms_per_node();
    let max_vms = config.max_vms();

    let (due, later): (Vec<Reservation>, Vec<Reservation>) = s
        .pending_reservations
        .iter()
        .partition(|r| r.activation_tick <= now);
    s.pending_reservations = later;
    for r in due {
        s.place_vms(r.vms, per_node);
    }

    let mut infeasible = false;
    let committed = s.active_vms() + s.pending_vms();
    match action.kind {
        ActionKind::Noop => {}
        ActionKind::Expand => {
            let k = action.level as u32;
            if committed + k > max_vms {
                infeasible = true;
            } else if config.provisioning_delay == 0 {
                s.place_vms(k, per_node);
            } else {
                s.pending_reservations.push(Reservation {
                    activation_tick: now + config.provisioning_delay,
                    vms: k,
                });
            }
        }
        ActionKind::Contract => {
            let k = action.level as u32;
            if s.active_vms() < config.min_vms + k {
                infeasible = true;
            } else {
                s.remove_vms(k);
            }
        }
        ActionKind::Migrate => {
            infeasible = !migrate(&mut s, action.level as f64 * config.migration_unit);
        }
    }
    if let Some(r) = reservation {
        let committed = s.active_vms() + s.pending_vms();
        if r.vms == 0 || committed + r.vms > max_vms {
            infeasible = true;
        } else if r.activation_tick <= now {
            s.place_vms(r.vms, per_node);
        } else {
            s.pending_reservations.push(r);
        }
    }

    let served = route(&mut s, demand.cpu, config.stickiness);
    let dropped = (demand.cpu - served).max(0.0);

    let mut weighted = 0.0;
    for n in &mut s.nodes {
        let has_vms = n.vm_count > 0;
        n.mem_used = n.vm_count as f64 * s.vm_mem * demand.mem_fraction;
        n.storage_io_util = if has_vms { demand.storage_io } else { 0.0 };
        if n.cpu_used > 0.0 {
            weighted += n.cpu_used * latency_model(n.cpu_util(s.vm_cpu), config.base_latency_ms);
        }
    }
    let latency = if served > 0.0 {
        weighted / served
    } else if demand.cpu > 0.0 {
        latency_model(1.0, config.base_latency_ms)
    } else {
        config.base_latency_ms
    };
    let success = if demand.cpu > 0.0 {
        served / demand.cpu
    } else {
        1.0
    };
    s.last_latency_ms = latency;
    s.request_success_rate = success;
    s.tick = now + 1;

    let provisioned = s.provisioned_cpu();
    let obs = StepObservation {
        tick: now,
        demand: *demand,
        served,
        dropped,
        node_utils: s.node_utils(),
        cpu_util: if provisioned > 0.0 {
            served / provisioned
        } else if demand.cpu > 0.0 {
            1.0
        } else {
            0.0
        },
        mem_util: if s.active_vms() > 0 {
            demand.mem_fraction
        } else {
            0.0
        },
        storage_util: demand.storage_io,
        net_traffic: demand.net,
        latency_ms: latency,
        success_rate: success,
        imbalance: s.imbalance(),
        active_vms: s.active_vms(),
        pending_vms: s.pending_vms(),
        provisioned_cpu: provisioned,
        action,
        infeasible,
    };
    (s, obs)
}

/// Moves resident load from the most to the least utilized VM-hosting node.
fn migrate(s: &mut ClusterState, amount: f64) -> bool {
    let vm_cpu = s.vm_cpu;
    let hosts: Vec<usize> = (0..s.nodes.len()).filter(|&i| s.nodes[i].vm_count > 0).collect();
    if hosts.len() < 2 {
        return false;
    }
    let util = |i: usize| s.nodes[i].cpu_util(vm_cpu);
    let mut src = hosts[0];
    let mut dst = hosts[0];
    for &i in &hosts {
        if util(i) > util(src) {
            src = i;
        }
        if util(i) < util(dst) {
            dst = i;
        }
    }
    let room = s.nodes[dst].provisioned_cpu(vm_cpu) - s.nodes[dst].cpu_used;
    let moved = amount.min(s.nodes[src].cpu_used).min(room);
    if src == dst || moved <= 0.0 {
        return false;
    }
    s.nodes[src].cpu_used -= moved;
    s.nodes[dst].cpu_used += moved;
    true
}

/// Assigns `demand` cores to nodes and returns the amount served.
fn route(s: &mut ClusterState, demand: f64, stickiness: f64) -> f64 {
    let vm_cpu = s.vm_cpu;
    let caps: Vec<f64> = s.nodes.iter().map(|n| n.provisioned_cpu(vm_cpu)).collect();
    let mut resident: Vec<f64> = s
        .nodes
        .iter()
        .zip(&caps)
        .map(|(n, &c)| (stickiness * n.cpu_used).min(c))
        .collect();
    let total_resident: f64 = resident.iter().sum();
    if total_resident > demand && total_resident > 0.0 {
        let scale = demand / total_resident;
        resident.iter_mut().for_each(|r| *r *= scale);
    }
    // Rescaled resident load can exceed demand by an ulp.
    let fresh = (demand - resident.iter().sum::<f64>()).max(0.0);
    let free: Vec<f64> = caps
        .iter()
        .zip(&resident)
        .map(|(c, r)| (c - r).max(0.0))
        .collect();
    let total_free: f64 = free.iter().sum();
    for (i, n) in s.nodes.iter_mut().enumerate() {
        let add = if fresh >= total_free {
            free[i]
        } else if total_free > 0.0 {
            fresh * free[i] / total_free
        } else {
            0.0
        };
        n.cpu_used = (resident[i] + add).min(caps[i]);
    }
    if fresh < total_free {
        demand
    } else {
        s.nodes.iter().map(|n| n.cpu_used).sum::<f64>().min(demand)
    }
}
