use super::qnet::{argmax, QNetwork};
use super::state::encode_context;
use crate::simenv::{Action, Decision, Policy, PolicyContext, Reservation};

/// Never changes the pool.
#[derive(Debug, Clone, Default)]
pub struct StaticPolicy;

impl Policy for StaticPolicy {
    fn name(&self) -> String {
        "static".into()
    }

    fn decide(&mut self, _: &PolicyContext<'_>) -> Decision {
        Decision::action(0)
    }
}

/// Rule-based autoscaler: expand (by up to five VMs, towards
/// `reservation_target`) when forecast utilization exceeds the CPU bound, rebalance above the imbalance limit, contract when current
/// utilization is low, and reserve capacity `lead` ticks ahead of a forecast
/// threshold crossing.
#[derive(Debug, Clone)]
pub struct ThresholdReactive {
    pub low_util: f64,
    pub imbalance: f64,
    pub lead: usize,
    /// Utilization a reservation aims for at its activation tick.
    pub reservation_target: f64,
}

impl Default for ThresholdReactive {
    fn default() -> Self {
        Self {
            low_util: 0.4,
            imbalance: 0.20,
            lead: 3,
            reservation_target: 0.75,
        }
    }
}

impl Policy for ThresholdReactive {
    fn name(&self) -> String {
        "threshold_reactive".into()
    }

    fn decide(&mut self, ctx: &PolicyContext<'_>) -> Decision {
        let cpu_max = ctx.constraints.cpu_max;
        let vm_cpu = ctx.cluster.vm_cpu;
        let committed_vms = ctx.state.active_vms() + ctx.state.pending_vms();
        let committed = committed_vms as f64 * vm_cpu;
        let util_of = |d: f64| {
            if committed > 0.0 {
                d / committed
            } else {
                f64::INFINITY
            }
        };

        let mut reservation = None;
        if ctx.forecast.len() > self.lead {
            let at = ctx.forecast[self.lead];
            let before = ctx.forecast[self.lead - 1];
            if util_of(at) > cpu_max && util_of(before) <= cpu_max {
                let needed = (at / (self.reservation_target * vm_cpu)).ceil() as u32;
                let room = ctx.cluster.max_vms().saturating_sub(committed_vms);
                let vms = needed.saturating_sub(committed_vms).max(1).min(room);
                if vms > 0 {
                    reservation = Some(Reservation {
                        activation_tick: (ctx.tick + self.lead) as u64,
                        vms,
                    });
                }
            }
        }

        let last = ctx.history.last();
        let forecast_now = ctx.forecast.first().copied().unwrap_or(0.0);
        let action = if util_of(forecast_now) > cpu_max {
            let needed = (forecast_now / (self.reservation_target * vm_cpu)).ceil() as u32;
            Action::expand(needed.saturating_sub(committed_vms).clamp(1, 5) as u8)
        } else if last.is_some_and(|o| o.imbalance > self.imbalance) {
            Action::migrate(1)
        } else if last.is_some_and(|o| o.cpu_util < self.low_util) {
            Action::contract(1)
        } else {
            Action::NOOP
        };
        Decision {
            action_id: action.id(),
            reservation,
        }
    }
}

/// Greedy policy of a trained Q-network.
#[derive(Debug, Clone)]
pub struct DqnPolicy {
    pub q: QNetwork,
}

impl Policy for DqnPolicy {
    fn name(&self) -> String {
        "dqn".into()
    }

    fn decide(&mut self, ctx: &PolicyContext<'_>) -> Decision {
        let action = encode_context(
            ctx.history,
            ctx.forecast,
            ctx.state,
            ctx.frame,
            ctx.cluster,
            ctx.constraints,
        )
        .map(|s| argmax(&self.q.q_values(s.as_slice())))
        .unwrap_or(0);
        Decision::action(action)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Static,
    ThresholdReactive,
}

pub fn baseline_policy(kind: BaselineKind) -> Box<dyn Policy> {
    match kind {
        BaselineKind::Static => Box::new(StaticPolicy),
        BaselineKind::ThresholdReactive => Box::new(ThresholdReactive::default()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simenv::{init_cluster, ClusterConfig, ConstraintSet, Demand, StepObservation, N_ACTIONS};
    use crate::trace::{TraceFrame, N_FEATURES};
    use ndarray::Array2;

    fn frame() -> TraceFrame {
        TraceFrame::canonical(0, 300, Array2::zeros((10, N_FEATURES))).unwrap()
    }

    fn obs(cpu_util: f64, imbalance: f64) -> StepObservation {
        StepObservation {
            tick: 0,
            demand: Demand::default(),
            served: 0.0,
            dropped: 0.0,
            node_utils: vec![],
            cpu_util,
            mem_util: 0.5,
            storage_util: 0.1,
            net_traffic: 0.0,
            latency_ms: 20.0,
            success_rate: 1.0,
            imbalance,
            active_vms: 40,
            pending_vms: 0,
            provisioned_cpu: 80.0,
            action: Action::NOOP,
            infeasible: false,
        }
    }

    fn decide(p: &mut dyn Policy, history: &[StepObservation], forecast: &[f64], tick: usize) -> Decision {
        let cluster = ClusterConfig {
            initial_vms: 40,
            ..ClusterConfig::default()
        };
        let state = init_cluster(&cluster).unwrap();
        let f = frame();
        p.decide(&PolicyContext {
            tick,
            state: &state,
            history,
            forecast,
            frame: &f,
            cluster: &cluster,
            constraints: &ConstraintSet::default(),
        })
    }

    #[test]
    fn static_always_noop() {
        assert_eq!(
            decide(&mut StaticPolicy, &[obs(0.99, 0.5)], &[500.0; 6], 3).action_id,
            0
        );
    }

    #[test]
    fn threshold_rebalances_above_imbalance_limit() {
        let d = decide(&mut ThresholdReactive::default(), &[obs(0.6, 0.3)], &[48.0; 6], 5);
        assert_eq!(d.action_id, Action::migrate(1).id());
        let d = decide(&mut ThresholdReactive::default(), &[obs(0.3, 0.0)], &[24.0; 6], 5);
        assert_eq!(d.action_id, Action::contract(1).id());
        let d = decide(&mut ThresholdReactive::default(), &[obs(0.6, 0.0)], &[70.0; 6], 5);
        assert_eq!(d.action_id, Action::expand(5).id());
    }

    #[test]
    fn reservation_booked_three_ticks_before_crossing() {
        // 80 provisioned cores; demand crosses 0.85 × 80 = 68 at offset 3.
        let forecast = [50.0, 55.0, 60.0, 70.0, 75.0, 75.0];
        let t = 17;
        let d = decide(
            &mut ThresholdReactive::default(),
            &[obs(0.6, 0.0)],
            &forecast,
            t - 3,
        );
        let r = d.reservation.expect("reservation booked");
        assert_eq!(r.activation_tick, t as u64);
        // Enough VMs to bring 70 cores to 75 % utilization: ceil(70 / 1.5) = 47.
        assert_eq!(r.vms, 7);
        assert_eq!(d.action_id, 0);
        let none = decide(
            &mut ThresholdReactive::default(),
            &[obs(0.6, 0.0)],
            &[50.0; 6],
            t - 3,
        );
        assert!(none.reservation.is_none());
    }

    #[test]
    fn baselines_stay_in_action_range() {
        for kind in [BaselineKind::Static, BaselineKind::ThresholdReactive] {
            let mut p = baseline_policy(kind);
            assert!(decide(p.as_mut(), &[], &[], 0).action_id < N_ACTIONS);
        }
    }
}
