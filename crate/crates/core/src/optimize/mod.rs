//! The multi-objective score `F = w1·U − w2·C + w3·Q`, a particle swarm
//! optimizer, and PSO tuning of the score's weights against the simulator.

mod objective;
mod pso;
mod tune;

use thiserror::Error;

pub use objective::{
    episode_objective_inputs, objective_f, ObjectiveInputs, ObjectivePolicy, ObjectiveWeights,
};
pub use pso::{pso_minimize, pso_minimize_fallible, HistoryEntry, PsoConfig, PsoResult};
pub use tune::{
    project_simplex, simulation_harness_score, tune_objective_weights, write_tuning_log, TuningHarness,
};

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("invalid PSO config: {0}")]
    InvalidConfig(String),
    #[error("fitness is {value} at position {position:?}")]
    NonFinite { position: Vec<f64>, value: f64 },
    #[error("fitness evaluation failed at {position:?}: {message}")]
    Evaluation { position: Vec<f64>, message: String },
    #[error("harness failed for weights {weights:?}: {message}")]
    Harness { weights: [f64; 3], message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
