//! Discrete-time cluster simulator. One tick is five simulated minutes: the
//! scheduler acts, the tick's demand is routed across nodes, and latency,
//! success rate and the constraint set are evaluated.

mod action;
mod cluster;
mod constraints;
mod episode;
mod track;

use thiserror::Error;

pub use action::{Action, ActionKind, N_ACTIONS};
pub use cluster::{
    init_cluster, latency_model, offered_load, step, step_decision, ClusterConfig, ClusterState, Demand,
    NodeState, Reservation, StepObservation,
};
pub use constraints::{
    check_constraints, Constraint, ConstraintReport, ConstraintSet, Violation, BOUNDARY_TOLERANCE,
};
pub use episode::{
    read_episode_csv, run_episode, write_episode_csv, Decision, EpisodeRow, EpisodeTrace, Policy,
    PolicyContext,
};
pub use track::ForecastTrack;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid cluster config: {0}")]
    InvalidConfig(String),
    #[error("initial placement of {requested} VMs exceeds capacity {capacity}")]
    OverCapacity { requested: u32, capacity: u32 },
    #[error("tick {tick} outside trace of {len} ticks")]
    TickOutOfRange { tick: usize, len: usize },
    #[error("policy returned action id {0}; valid ids are 0..{N_ACTIONS}")]
    InvalidAction(usize),
    #[error("forecast track covers {track} ticks, trace has {trace}")]
    TrackLength { track: usize, trace: usize },
    #[error(transparent)]
    Trace(#[from] crate::trace::TraceError),
    #[error(transparent)]
    Forecast(#[from] crate::forecast::ForecastError),
    #[error("episode CSV: {0}")]
    EpisodeCsv(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
