use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train_agent, AgentError, DqnConfig, DqnPolicy, RewardConfig, RewardWeights};
use crate::optimize::{episode_objective_inputs, objective_f, ObjectiveWeights};
use crate::simenv::{run_episode, ClusterConfig, ConstraintSet, ForecastTrack};
use crate::trace::TraceFrame;

/// Every weight triple on the simplex whose components are multiples of
/// `1 / divisions`.
pub fn simplex_grid(divisions: usize) -> Vec<RewardWeights> {
    let n = divisions.max(1);
    let mut out = Vec::new();
    for i in 0..=n {
        for j in 0..=n - i {
            let k = n - i - j;
            let w = [i, j, k].map(|v| v as f64 / n as f64);
            out.push(RewardWeights::new(w[0], w[1], w[2]).expect("grid point on simplex"));
        }
    }
    out
}

/// Training and held-out evaluation data shared by every candidate.
pub struct GridSearchSetup<'a> {
    pub train_frame: &'a TraceFrame,
    pub train_track: &'a ForecastTrack,
    pub eval_frame: &'a TraceFrame,
    pub eval_track: &'a ForecastTrack,
    pub cluster: &'a ClusterConfig,
    pub constraints: &'a ConstraintSet,
    pub reward: &'a RewardConfig,
    pub dqn: &'a DqnConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredWeights {
    pub weights: RewardWeights,
    pub score: f64,
}

impl GridSearchSetup<'_> {
    /// Trains with `weights` and scores the greedy policy on the held-out
    /// trace by the objective with equal weights.
    pub fn score(&self, weights: RewardWeights) -> Result<f64, AgentError> {
        let reward = RewardConfig {
            weights,
            ..self.reward.clone()
        };
        let (q, _) = train_agent(
            self.train_frame,
            self.train_track,
            self.cluster,
            self.constraints,
            &reward,
            self.dqn,
        )?;
        let trace = run_episode(
            self.eval_frame,
            self.eval_track,
            self.cluster,
            self.constraints,
            &mut DqnPolicy { q },
            &|o| reward.reward(o, self.cluster, self.constraints),
            self.dqn.seed,
        )?;
        let inputs = episode_objective_inputs(&trace, self.cluster, self.constraints);
        Ok(objective_f(&inputs, &ObjectiveWeights::equal()))
    }
}

/// Scores every candidate (in parallel; results are in candidate order and
/// independent of scheduling) and returns the best with the full table.
/// Ties go to the earlier candidate.
pub fn grid_search_weights<F>(
    candidates: &[RewardWeights],
    score: F,
) -> Result<(RewardWeights, Vec<ScoredWeights>), AgentError>
where
    F: Fn(RewardWeights) -> Result<f64, AgentError> + Sync,
{
    if candidates.is_empty() {
        return Err(AgentError::InvalidConfig("grid search needs a candidate".into()));
    }
    let table: Vec<ScoredWeights> = candidates
        .par_iter()
        .map(|&weights| {
            let score = score(weights)?;
            if !score.is_finite() {
                return Err(AgentError::Candidate {
                    weights: weights.as_array(),
                    message: format!("non-finite score {score}"),
                });
            }
            Ok(ScoredWeights { weights, score })
        })
        .collect::<Result<_, _>>()?;
    let mut best = 0;
    for (i, row) in table.iter().enumerate() {
        if row.score > table[best].score {
            best = i;
        }
    }
    Ok((table[best].weights, table))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_66_points_at_step_one_tenth() {
        let g = simplex_grid(10);
        assert_eq!(g.len(), 66);
        let mut enumerated = 0;
        for i in 0..=10 {
            for j in 0..=10 {
                for k in 0..=10 {
                    if i + j + k == 10 {
                        enumerated += 1;
                    }
                }
            }
        }
        assert_eq!(enumerated, 66);
        for w in &g {
            assert!((w.as_array().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_candidate_wins() {
        let w = RewardWeights::new(0.2, 0.3, 0.5).unwrap();
        let (best, table) = grid_search_weights(&[w], |_| Ok(-4.0)).unwrap();
        assert_eq!(best, w);
        assert_eq!(table.len(), 1);
    }

    #[test]
    fn best_score_selected_in_order() {
        let g = simplex_grid(10);
        let (best, table) = grid_search_weights(&g, |w| Ok(-(w.w1() - 0.3).abs())).unwrap();
        assert_eq!(table.len(), 66);
        assert!((best.w1() - 0.3).abs() < 1e-12);
        assert!(table
            .iter()
            .zip(&g)
            .all(|(r, w)| r.weights == *w && r.score.is_finite()));
    }
}
