use std::io::Write;
use std::path::Path;

use super::{
    episode_objective_inputs, pso_minimize_fallible, ObjectivePolicy, ObjectiveWeights, OptimizeError,
    PsoConfig, PsoResult,
};
use crate::simenv::{run_episode, ClusterConfig, ConstraintSet, ForecastTrack, SimError};
use crate::trace::TraceFrame;

/// Penalty per unit of SLA-violation rate in the tuning score.
const SLA_PENALTY: f64 = 10.0;

/// Clips negatives to zero and rescales to sum one; all-zero (or non-finite)
/// input maps to equal weights.
pub fn project_simplex(x: &[f64]) -> ObjectiveWeights {
    let clip = |i: usize| {
        x.get(i)
            .copied()
            .filter(|v| v.is_finite())
            .unwrap_or(0.0)
            .max(0.0)
    };
    ObjectiveWeights::new(clip(0), clip(1), clip(2)).unwrap_or_else(ObjectiveWeights::equal)
}

/// Tunes objective weights with PSO over the unit cube, projecting each
/// position onto the simplex before `harness` scores it (lower is better).
pub fn tune_objective_weights<H, E>(
    harness: H,
    config: &PsoConfig,
) -> Result<(ObjectiveWeights, PsoResult), OptimizeError>
where
    H: Fn(ObjectiveWeights) -> Result<f64, E> + Sync,
    E: std::fmt::Display,
{
    if config.bounds.len() != 3 {
        return Err(OptimizeError::InvalidConfig(format!(
            "weight tuning needs 3 dimensions, got {}",
            config.bounds.len()
        )));
    }
    let result = pso_minimize_fallible(|x| harness(project_simplex(x)), config).map_err(|e| match e {
        OptimizeError::Evaluation { position, message } => OptimizeError::Harness {
            weights: project_simplex(&position).as_array(),
            message,
        },
        OptimizeError::NonFinite { position, value } => OptimizeError::Harness {
            weights: project_simplex(&position).as_array(),
            message: format!("non-finite score {value}"),
        },
        e => e,
    })?;
    Ok((project_simplex(&result.best_position), result))
}

/// Everything needed to score a weight triple by simulation.
pub struct TuningHarness<'a> {
    pub frame: &'a TraceFrame,
    pub track: &'a ForecastTrack,
    pub cluster: &'a ClusterConfig,
    pub constraints: &'a ConstraintSet,
    pub seed: u64,
}

/// Runs the objective-greedy policy with `weights` and returns mean
/// normalized cost plus a penalty on the share of ticks over the latency
/// bound.
pub fn simulation_harness_score(h: &TuningHarness<'_>, weights: ObjectiveWeights) -> Result<f64, SimError> {
    let trace = run_episode(
        h.frame,
        h.track,
        h.cluster,
        h.constraints,
        &mut ObjectivePolicy { weights },
        &|_| 0.0,
        h.seed,
    )?;
    let x = episode_objective_inputs(&trace, h.cluster, h.constraints);
    Ok(x.c + SLA_PENALTY * (1.0 - x.q))
}

/// Writes `iteration,best_fitness,w1,w2,w3` for each history entry.
pub fn write_tuning_log(result: &PsoResult, path: &Path) -> Result<(), OptimizeError> {
    let io = |source| OptimizeError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = csv::Writer::from_writer(file);
    let csv_err = |e: csv::Error| io(std::io::Error::other(e.to_string()));
    w.write_record(["iteration", "best_fitness", "w1", "w2", "w3"])
        .map_err(csv_err)?;
    for h in &result.history {
        let wt = project_simplex(&h.best_position);
        w.write_record([
            h.iteration.to_string(),
            h.best_fitness.to_string(),
            wt.w1.to_string(),
            wt.w2.to_string(),
            wt.w3.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io)?;
    w.into_inner()
        .map_err(|e| io(e.into_error()))?
        .flush()
        .map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist_to_center(w: ObjectiveWeights) -> Result<f64, String> {
        Ok(w.as_array()
            .iter()
            .map(|v| (v - 1.0 / 3.0).powi(2))
            .sum::<f64>()
            .sqrt())
    }

    #[test]
    fn recovers_equal_weights() {
        let cfg = PsoConfig {
            seed: 11,
            ..PsoConfig::default()
        };
        let (w, _) = tune_objective_weights(dist_to_center, &cfg).unwrap();
        for v in w.as_array() {
            assert!((v - 1.0 / 3.0).abs() < 1e-3, "{w:?}");
        }
        assert!((w.w1 + w.w2 + w.w3 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_candidate_is_returned() {
        let cfg = PsoConfig {
            swarm_size: 1,
            iterations: 1,
            seed: 5,
            ..PsoConfig::default()
        };
        let seen = std::sync::Mutex::new(Vec::new());
        let (w, _) = tune_objective_weights(
            |w: ObjectiveWeights| {
                seen.lock().unwrap().push(w);
                Ok::<_, String>(1.0)
            },
            &cfg,
        )
        .unwrap();
        let seen = seen.into_inner().unwrap();
        assert_eq!(seen.len(), 2);
        assert_eq!(w, seen[0]);
    }

    #[test]
    fn projection() {
        assert_eq!(project_simplex(&[0.0, 0.0, 0.0]), ObjectiveWeights::equal());
        assert_eq!(
            project_simplex(&[-1.0, 2.0, 2.0]),
            ObjectiveWeights::new(0.0, 0.5, 0.5).unwrap()
        );
    }

    #[test]
    fn harness_error_carries_weights() {
        let cfg = PsoConfig {
            iterations: 2,
            ..PsoConfig::default()
        };
        let e = tune_objective_weights(
            |w: ObjectiveWeights| if w.w1 > 0.2 { Err("boom") } else { Ok(0.0) },
            &cfg,
        )
        .unwrap_err();
        match e {
            OptimizeError::Harness { weights, message } => {
                assert!(weights[0] > 0.2);
                assert_eq!(message, "boom");
            }
            e => panic!("{e}"),
        }
    }
}
