use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::OptimizeError;
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Per-dimension `(lo, hi)`.
    pub bounds: Vec<(f64, f64)>,
    pub seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            swarm_size: 30,
            iterations: 200,
            inertia: 0.72,
            cognitive: 1.49,
            social: 1.49,
            bounds: vec![(0.0, 1.0); 3],
            seed: 0,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        let bad = |m: String| Err(OptimizeError::InvalidConfig(m));
        if self.swarm_size == 0 {
            return bad("swarm_size must be >= 1".into());
        }
        if self.bounds.is_empty() {
            return bad("bounds must have at least one dimension".into());
        }
        for (d, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return bad(format!("bounds[{d}] = ({lo}, {hi}) needs finite lo < hi"));
            }
        }
        for (name, v) in [
            ("inertia", self.inertia),
            ("cognitive", self.cognitive),
            ("social", self.social),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} = {v} must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
}

/// Global best after initialization (iteration 0) and after each update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub best_fitness: f64,
    pub best_position: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoResult {
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    pub history: Vec<HistoryEntry>,
}

/// Minimizes `fitness` over the box in `config.bounds`.
pub fn pso_minimize<F>(fitness: F, config: &PsoConfig) -> Result<PsoResult, OptimizeError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pso_minimize_fallible(|x| Ok::<_, String>(fitness(x)), config)
}

/// As [`pso_minimize`] for a fitness that can fail. Evaluations within an
/// iteration run in parallel; every random draw comes from a stream derived
/// from `(seed, iteration, particle)`, so results do not depend on scheduling.
pub fn pso_minimize_fallible<F, E>(fitness: F, config: &PsoConfig) -> Result<PsoResult, OptimizeError>
where
    F: Fn(&[f64]) -> Result<f64, E> + Sync,
    E: std::fmt::Display,
{
    config.validate()?;
    let bounds = &config.bounds;
    let evaluate = |positions: Vec<&[f64]>| -> Result<Vec<f64>, OptimizeError> {
        positions
            .into_par_iter()
            .map(|x| {
                let v = fitness(x).map_err(|e| OptimizeError::Evaluation {
                    position: x.to_vec(),
                    message: e.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(OptimizeError::NonFinite {
                        position: x.to_vec(),
                        value: v,
                    });
                }
                Ok(v)
            })
            .collect()
    };

    let mut swarm: Vec<Particle> = (0..config.swarm_size)
        .map(|i| {
            let mut rng = seeded(derive_seed(config.seed, i as u64));
            let position: Vec<f64> = bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect();
            let velocity = bounds
                .iter()
                .map(|&(lo, hi)| 0.1 * (hi - lo) * rng.random_range(-1.0..=1.0))
                .collect();
            Particle {
                best_position: position.clone(),
                position,
                velocity,
                best_fitness: f64::INFINITY,
            }
        })
        .collect();
    let values = evaluate(swarm.iter().map(|p| p.position.as_slice()).collect())?;
    for (p, v) in swarm.iter_mut().zip(values) {
        p.best_fitness = v;
    }
    let mut g = best_index(&swarm);
    let mut gbest = swarm[g].best_position.clone();
    let mut gfit = swarm[g].best_fitness;
    let mut history = vec![HistoryEntry {
        iteration: 0,
        best_fitness: gfit,
        best_position: gbest.clone(),
    }];

    for it in 1..=config.iterations {
        let stream = derive_seed(config.seed, (it as u64) << 32);
        for (i, p) in swarm.iter_mut().enumerate() {
            let mut rng = seeded(derive_seed(stream, i as u64));
            for (d, &(lo, hi)) in bounds.iter().enumerate() {
                let (r1, r2): (f64, f64) = (rng.random(), rng.random());
                let vmax = hi - lo;
                let v = config.inertia * p.velocity[d]
                    + config.cognitive * r1 * (p.best_position[d] - p.position[d])
                    + config.social * r2 * (gbest[d] - p.position[d]);
                p.velocity[d] = v.clamp(-vmax, vmax);
                p.position[d] = (p.position[d] + p.velocity[d]).clamp(lo, hi);
            }
        }
        let values = evaluate(swarm.iter().map(|p| p.position.as_slice()).collect())?;
        for (p, v) in swarm.iter_mut().zip(values) {
            if v < p.best_fitness {
                p.best_fitness = v;
                p.best_position.clone_from(&p.position);
            }
        }
        g = best_index(&swarm);
        if swarm[g].best_fitness < gfit {
            gfit = swarm[g].best_fitness;
            gbest.clone_from(&swarm[g].best_position);
        }
        history.push(HistoryEntry {
            iteration: it,
            best_fitness: gfit,
            best_position: gbest.clone(),
        });
    }
    Ok(PsoResult {
        best_position: gbest,
        best_fitness: gfit,
        history,
    })
}

/// Lowest personal best; ties go to the lower index.
fn best_index(swarm: &[Particle]) -> usize {
    let mut g = 0;
    for (i, p) in swarm.iter().enumerate() {
        if p.best_fitness < swarm[g].best_fitness {
            g = i;
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn sphere_converges() {
        let cfg = PsoConfig {
            bounds: vec![(-5.0, 5.0); 10],
            seed: 7,
            ..PsoConfig::default()
        };
        let r = pso_minimize(sphere, &cfg).unwrap();
        assert!(r.best_fitness < 1e-6, "{}", r.best_fitness);
        assert_eq!(r.history.len(), 201);
        assert!(r
            .history
            .windows(2)
            .all(|w| w[1].best_fitness <= w[0].best_fitness));
    }

    #[test]
    fn rosenbrock_converges() {
        let cfg = PsoConfig {
            bounds: vec![(-2.0, 2.0); 2],
            iterations: 500,
            seed: 3,
            ..PsoConfig::default()
        };
        let r = pso_minimize(rosenbrock, &cfg).unwrap();
        assert!(r.best_fitness < 1e-3, "{}", r.best_fitness);
    }

    #[test]
    fn constant_fitness() {
        let cfg = PsoConfig {
            iterations: 5,
            ..PsoConfig::default()
        };
        let r = pso_minimize(|_| 3.0, &cfg).unwrap();
        assert_eq!(r.best_fitness, 3.0);
        assert!(r.best_position.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn every_evaluation_stays_in_the_box() {
        let seen = Mutex::new(Vec::new());
        let cfg = PsoConfig {
            bounds: vec![(-1.0, 0.5), (2.0, 3.0)],
            iterations: 30,
            swarm_size: 8,
            ..PsoConfig::default()
        };
        pso_minimize(
            |x| {
                seen.lock().unwrap().push(x.to_vec());
                (x[0] - 9.0).powi(2) + x[1]
            },
            &cfg,
        )
        .unwrap();
        let seen = seen.into_inner().unwrap();
        assert_eq!(seen.len(), 8 * 31);
        assert!(seen
            .iter()
            .all(|x| (-1.0..=0.5).contains(&x[0]) && (2.0..=3.0).contains(&x[1])));
    }

    #[test]
    fn deterministic_and_errors_name_position() {
        let cfg = PsoConfig {
            bounds: vec![(-3.0, 3.0); 4],
            iterations: 20,
            ..PsoConfig::default()
        };
        assert_eq!(
            pso_minimize(sphere, &cfg).unwrap(),
            pso_minimize(sphere, &cfg).unwrap()
        );
        let err = pso_minimize(|x| if x[0] > 0.0 { f64::NAN } else { 1.0 }, &cfg).unwrap_err();
        match err {
            OptimizeError::NonFinite { position, .. } => assert!(position[0] > 0.0),
            e => panic!("{e}"),
        }
        let bad = PsoConfig {
            bounds: vec![(1.0, 1.0)],
            ..PsoConfig::default()
        };
        assert!(pso_minimize(sphere, &bad).is_err());
    }
}
