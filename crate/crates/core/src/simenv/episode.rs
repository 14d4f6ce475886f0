use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{
    check_constraints, init_cluster, offered_load, step_decision, Action, ClusterConfig, ClusterState,
    ConstraintSet, ForecastTrack, Reservation, SimError, StepObservation,
};
use crate::trace::TraceFrame;

/// What a policy sees before acting at `tick`.
pub struct PolicyContext<'a> {
    pub tick: usize,
    pub state: &'a ClusterState,
    /// Observations of every earlier tick of the episode.
    pub history: &'a [StepObservation],
    /// Forecast demand, in cores, for `tick ..`.
    pub forecast: &'a [f64],
    /// The trace being replayed; policies must only read rows before `tick`.
    pub frame: &'a TraceFrame,
    pub cluster: &'a ClusterConfig,
    pub constraints: &'a ConstraintSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub action_id: usize,
    /// Capacity booked ahead of time, activated at the given tick.
    pub reservation: Option<Reservation>,
}

impl Decision {
    pub fn action(action_id: usize) -> Decision {
        Decision {
            action_id,
            reservation: None,
        }
    }
}

pub trait Policy {
    fn name(&self) -> String;

    /// Called once before each episode.
    fn reset(&mut self, _seed: u64) {}

    fn decide(&mut self, ctx: &PolicyContext<'_>) -> Decision;
}

/// One exported tick of an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub tick: u64,
    pub demand: f64,
    pub cpu_util: f64,
    pub mem_util: f64,
    pub latency_ms: f64,
    pub success_rate: f64,
    pub action_id: usize,
    pub reward: f64,
    pub violations_count: usize,
    pub active_vms: u32,
    pub provisioned_cpu: f64,
    pub storage_util: f64,
    pub net_traffic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub policy: String,
    pub seed: u64,
    pub rows: Vec<EpisodeRow>,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Fraction of ticks with at least one violated constraint.
    pub fn violation_rate(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().filter(|r| r.violations_count > 0).count() as f64 / self.rows.len() as f64
    }
}

/// Replays `frame` tick by tick from a fresh cluster, asking `policy` for a
/// decision each tick and scoring each observation with `reward`.
pub fn run_episode(
    frame: &TraceFrame,
    forecasts: &ForecastTrack,
    cluster: &ClusterConfig,
    constraints: &ConstraintSet,
    policy: &mut dyn Policy,
    reward: &dyn Fn(&StepObservation) -> f64,
    seed: u64,
) -> Result<EpisodeTrace, SimError> {
    constraints.validate()?;
    if forecasts.len() < frame.len() {
        return Err(SimError::TrackLength {
            track: forecasts.len(),
            trace: frame.len(),
        });
    }
    policy.reset(seed);
    let mut state = init_cluster(cluster)?;
    let mut history: Vec<StepObservation> = Vec::with_capacity(frame.len());
    let mut rows = Vec::with_capacity(frame.len());
    for t in 0..frame.len() {
        let decision = policy.decide(&PolicyContext {
            tick: t,
            state: &state,
            history: &history,
            forecast: forecasts.row(t),
            frame,
            cluster,
            constraints,
        });
        let action =
            Action::from_id(decision.action_id).ok_or(SimError::InvalidAction(decision.action_id))?;
        let demand = offered_load(frame, t, cluster)?;
        let (next, obs) = step_decision(&state, &demand, action, decision.reservation, cluster);
        let report = check_constraints(&next, constraints);
        rows.push(EpisodeRow {
            tick: obs.tick,
            demand: demand.cpu,
            cpu_util: obs.cpu_util,
            mem_util: obs.mem_util,
            latency_ms: obs.latency_ms,
            success_rate: obs.success_rate,
            action_id: action.id(),
            reward: reward(&obs),
            violations_count: report.violations.len(),
            active_vms: obs.active_vms,
            provisioned_cpu: obs.provisioned_cpu,
            storage_util: obs.storage_util,
            net_traffic: obs.net_traffic,
        });
        history.push(obs);
        state = next;
    }
    Ok(EpisodeTrace {
        policy: policy.name(),
        seed,
        rows,
    })
}

pub fn write_episode_csv<W: Write>(trace: &EpisodeTrace, out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| SimError::EpisodeCsv(e.to_string());
    if trace.rows.is_empty() {
        w.write_record(EPISODE_COLUMNS).map_err(err)?;
    }
    for r in &trace.rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| SimError::EpisodeCsv(e.to_string()))
}

const EPISODE_COLUMNS: [&str; 13] = [
    "tick",
    "demand",
    "cpu_util",
    "mem_util",
    "latency_ms",
    "success_rate",
    "action_id",
    "reward",
    "violations_count",
    "active_vms",
    "provisioned_cpu",
    "storage_util",
    "net_traffic",
];

/// Parses an episode CSV. Columns must appear exactly as written by
/// [`write_episode_csv`]; every number must be finite and ticks increasing.
pub fn read_episode_csv<R: Read>(input: R) -> Result<Vec<EpisodeRow>, SimError> {
    let mut r = csv::ReaderBuilder::new().from_reader(input);
    let header = r
        .headers()
        .map_err(|e| SimError::EpisodeCsv(e.to_string()))?
        .clone();
    if header.iter().ne(EPISODE_COLUMNS) {
        return Err(SimError::EpisodeCsv(format!(
            "header must be {}",
            EPISODE_COLUMNS.join(",")
        )));
    }
    let mut rows: Vec<EpisodeRow> = Vec::new();
    for rec in r.deserialize() {
        let row: EpisodeRow = rec.map_err(|e| SimError::EpisodeCsv(e.to_string()))?;
        let floats = [
            row.demand,
            row.cpu_util,
            row.mem_util,
            row.latency_ms,
            row.success_rate,
            row.reward,
            row.provisioned_cpu,
            row.storage_util,
            row.net_traffic,
        ];
        if floats.iter().any(|v| !v.is_finite()) {
            return Err(SimError::EpisodeCsv(format!(
                "tick {}: non-finite value",
                row.tick
            )));
        }
        if Action::from_id(row.action_id).is_none() {
            return Err(SimError::InvalidAction(row.action_id));
        }
        if rows.last().is_some_and(|p| p.tick >= row.tick) {
            return Err(SimError::EpisodeCsv(format!("tick {} out of order", row.tick)));
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::N_FEATURES;
    use ndarray::Array2;

    struct Always(usize);

    impl Policy for Always {
        fn name(&self) -> String {
            format!("always{}", self.0)
        }

        fn decide(&mut self, _: &PolicyContext<'_>) -> Decision {
            Decision::action(self.0)
        }
    }

    fn constant_frame(n: usize, rate: f64) -> TraceFrame {
        let rr = crate::trace::feature_index("request_rate").unwrap();
        let data = Array2::from_shape_fn((n, N_FEATURES), |(_, j)| if j == rr { rate } else { 0.3 });
        TraceFrame::canonical(0, 300, data).unwrap()
    }

    fn run(frame: &TraceFrame, p: &mut dyn Policy) -> Result<EpisodeTrace, SimError> {
        let cfg = ClusterConfig::default();
        let track = ForecastTrack::persistence(frame, &cfg, 4)?;
        run_episode(
            frame,
            &track,
            &cfg,
            &ConstraintSet::default(),
            p,
            &|o| o.cpu_util,
            1,
        )
    }

    #[test]
    fn static_policy_on_constant_demand_is_flat() {
        let f = constant_frame(50, 400.0);
        let t = run(&f, &mut Always(0)).unwrap();
        assert_eq!(t.len(), 50);
        assert!(t.rows.iter().all(|r| (r.cpu_util - 0.4).abs() < 1e-12));
        assert_eq!(t, run(&f, &mut Always(0)).unwrap());
        assert_eq!(t.policy, "always0");
    }

    #[test]
    fn zero_tick_frame_gives_empty_trace() {
        let f = constant_frame(5, 1.0).slice(0, 0);
        assert!(run(&f, &mut Always(0)).unwrap().is_empty());
    }

    #[test]
    fn out_of_range_action_is_an_error() {
        let f = constant_frame(3, 1.0);
        assert!(matches!(
            run(&f, &mut Always(16)),
            Err(SimError::InvalidAction(16))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let f = constant_frame(20, 700.0);
        let t = run(&f, &mut Always(7)).unwrap();
        let mut buf = Vec::new();
        write_episode_csv(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "tick,demand,cpu_util,mem_util,latency_ms,success_rate,action_id,reward,violations_count,"
        ));
        assert_eq!(read_episode_csv(buf.as_slice()).unwrap(), t.rows);
        assert!(read_episode_csv("tick,demand\n1,2\n".as_bytes()).is_err());
    }
}
