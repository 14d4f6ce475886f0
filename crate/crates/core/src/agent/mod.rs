//! Double-DQN scheduler over the 16-action space, the reward it optimizes,
//! reward-weight grid search, and the baseline policies it is compared with.

mod checkpoint;
mod dqn;
mod env;
mod grid;
mod policies;
mod qnet;
mod replay;
mod reward;
mod state;

use thiserror::Error;

pub use crate::simenv::{Action, ActionKind, N_ACTIONS};
pub use checkpoint::{load_agent, parse_agent_checkpoint, save_agent, to_agent_json, AgentCheckpoint};
pub use dqn::{train_dqn, DqnConfig, EnvStep, Environment, TrainingLog};
pub use env::SimEnvironment;
pub use grid::{grid_search_weights, simplex_grid, GridSearchSetup, ScoredWeights};
pub use policies::{baseline_policy, BaselineKind, DqnPolicy, StaticPolicy, ThresholdReactive};
pub use qnet::{argmax, dqn_target, select_action, td_loss_and_gradients, QNetwork};
pub use replay::{ReplayBuffer, Transition};
pub use reward::{reward, RewardConfig, RewardWeights};
pub use state::{
    encode_context, encode_state, idle_observation, observation_metrics, StateVector, N_METRICS,
    ROLLING_WINDOW, STATE_DIM,
};

use crate::simenv::{ClusterConfig, ConstraintSet, ForecastTrack};
use crate::trace::TraceFrame;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("reward component {name} = {value} outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("weights {0:?} must be non-negative, finite and not all zero")]
    InvalidWeights([f64; 3]),
    #[error("invalid agent config: {0}")]
    InvalidConfig(String),
    #[error("state history is empty")]
    EmptyHistory,
    #[error("state vector has non-finite components")]
    NonFiniteState,
    #[error("action id {0} out of range")]
    InvalidAction(usize),
    #[error("training diverged at step {step}; try a lower learning rate")]
    Diverged { step: usize },
    #[error("agent checkpoint: {0}")]
    Checkpoint(String),
    #[error("grid search candidate {weights:?}: {message}")]
    Candidate { weights: [f64; 3], message: String },
    #[error(transparent)]
    Sim(#[from] crate::simenv::SimError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Trains a scheduler on `frame` with forecasts from `track`. Episodes start
/// at random offsets with a random initial pool size.
pub fn train_agent(
    frame: &TraceFrame,
    track: &ForecastTrack,
    cluster: &ClusterConfig,
    constraints: &ConstraintSet,
    reward: &RewardConfig,
    config: &DqnConfig,
) -> Result<(QNetwork, TrainingLog), AgentError> {
    let mut env = SimEnvironment::new(
        frame.clone(),
        track.clone(),
        cluster.clone(),
        constraints.clone(),
        reward.clone(),
        config.max_episode_steps,
        true,
    )?;
    train_dqn(&mut env, config)
}
