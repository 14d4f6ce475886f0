//! Forecast-driven resource allocation for a simulated cloud cluster.
//!
//! The crate is organised as a pipeline:
//!
//! * [`trace`] generates or ingests workload traces and prepares them
//!   (3σ cleaning, resampling with EMA imputation, min-max scaling, windows).
//! * [`forecast`] is a from-scratch stacked LSTM demand forecaster.
//! * [`simenv`] is a discrete-time cluster simulator with a constraint engine.
//! * [`agent`] holds the double-DQN scheduler and baseline policies.
//! * [`optimize`] has the multi-objective score and a particle swarm optimizer.
//! * [`report`] aggregates episodes into utilization, latency, SLA and cost
//!   figures.
//! * [`config`] and [`cli`] wire everything behind one JSON config.

pub mod agent;
pub mod cli;
pub mod config;
pub mod forecast;
pub mod nn;
pub mod optimize;
pub mod report;
pub mod rng;
pub mod simenv;
pub mod trace;
