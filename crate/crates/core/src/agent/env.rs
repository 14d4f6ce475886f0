use rand::Rng as _;

use super::dqn::{EnvStep, Environment};
use super::reward::RewardConfig;
use super::state::{encode_context, STATE_DIM};
use super::AgentError;
use crate::rng::Rng;
use crate::simenv::{
    init_cluster, offered_load, step, Action, ClusterConfig, ClusterState, ConstraintSet, ForecastTrack,
    StepObservation, N_ACTIONS,
};
use crate::trace::TraceFrame;

/// The simulator as a training environment. Each episode replays a window
/// of the trace from a random start, optionally with a random initial pool
/// size so the agent sees both over- and under-provisioned states.
pub struct SimEnvironment {
    frame: TraceFrame,
    track: ForecastTrack,
    cluster: ClusterConfig,
    constraints: ConstraintSet,
    reward: RewardConfig,
    episode_len: usize,
    randomize_initial_vms: bool,
    state: ClusterState,
    history: Vec<StepObservation>,
    tick: usize,
    end: usize,
}

impl SimEnvironment {
    pub fn new(
        frame: TraceFrame,
        track: ForecastTrack,
        cluster: ClusterConfig,
        constraints: ConstraintSet,
        reward: RewardConfig,
        episode_len: usize,
        randomize_initial_vms: bool,
    ) -> Result<Self, AgentError> {
        if frame.is_empty() || episode_len == 0 {
            return Err(AgentError::InvalidConfig(
                "training needs a non-empty trace and episode length ≥ 1".into(),
            ));
        }
        if track.len() < frame.len() {
            return Err(AgentError::Sim(crate::simenv::SimError::TrackLength {
                track: track.len(),
                trace: frame.len(),
            }));
        }
        constraints.validate()?;
        let state = init_cluster(&cluster)?;
        Ok(Self {
            frame,
            track,
            cluster,
            constraints,
            reward,
            episode_len,
            randomize_initial_vms,
            state,
            history: Vec::new(),
            tick: 0,
            end: 0,
        })
    }

    fn observe(&self) -> Vec<f64> {
        let row = self.tick.min(self.frame.len() - 1);
        encode_context(
            &self.history,
            self.track.row(row),
            &self.state,
            &self.frame,
            &self.cluster,
            &self.constraints,
        )
        .map(|s| s.0.to_vec())
        .unwrap_or_else(|_| vec![0.0; STATE_DIM])
    }
}

impl Environment for SimEnvironment {
    fn state_dim(&self) -> usize {
        STATE_DIM
    }

    fn n_actions(&self) -> usize {
        N_ACTIONS
    }

    fn reset(&mut self, rng: &mut Rng) -> Vec<f64> {
        let n = self.frame.len();
        let len = self.episode_len.min(n);
        let start = rng.random_range(0..=n - len);
        let mut cfg = self.cluster.clone();
        if self.randomize_initial_vms {
            cfg.initial_vms = rng.random_range(cfg.min_vms..=cfg.max_vms());
        }
        self.state = init_cluster(&cfg).expect("validated config");
        self.history.clear();
        self.tick = start;
        self.end = start + len;
        self.observe()
    }

    fn step(&mut self, action_id: usize) -> Result<EnvStep, AgentError> {
        let action = Action::from_id(action_id).ok_or(AgentError::InvalidAction(action_id))?;
        let demand = offered_load(&self.frame, self.tick, &self.cluster)?;
        let (next, mut obs) = step(&self.state, &demand, action, &self.cluster);
        obs.tick = self.tick as u64;
        let reward = self.reward.reward(&obs, &self.cluster, &self.constraints);
        self.state = next;
        self.history.push(obs);
        self.tick += 1;
        Ok(EnvStep {
            next_state: self.observe(),
            reward,
            terminal: false,
            truncated: self.tick >= self.end,
        })
    }
}
