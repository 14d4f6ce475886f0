use serde::{Deserialize, Serialize};

use super::qnet::{select_action, td_loss_and_gradients, QNetwork};
use super::replay::{ReplayBuffer, Transition};
use super::AgentError;
use crate::nn::{Momentum, Parameters};
use crate::rng::{self, Rng};

/// Outcome of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub next_state: Vec<f64>,
    pub reward: f64,
    /// The episode reached a terminal state (no bootstrapping).
    pub terminal: bool,
    /// The episode was cut off; the next state still bootstraps.
    pub truncated: bool,
}

/// Episodic environment with a flat state vector and discrete actions.
pub trait Environment {
    fn state_dim(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn reset(&mut self, rng: &mut Rng) -> Vec<f64>;
    fn step(&mut self, action: usize) -> Result<EnvStep, AgentError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnConfig {
    pub episodes: usize,
    /// Hard cap on steps per episode.
    pub max_episode_steps: usize,
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    /// Target network copy interval, in environment steps.
    pub sync_every: usize,
    pub lr: f64,
    pub momentum: f64,
    pub gradient_clip: f64,
    pub epsilon_start: f64,
    pub epsilon_final: f64,
    /// Share of all training steps over which ε decays linearly.
    pub exploration_fraction: f64,
    /// Transitions collected before the first update.
    pub warmup_steps: usize,
    /// Environment steps per gradient update.
    pub train_every: usize,
    pub seed: u64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            episodes: 100,
            max_episode_steps: 288,
            hidden: vec![64, 64],
            gamma: 0.95,
            buffer_capacity: 10_000,
            batch_size: 64,
            sync_every: 250,
            lr: 0.001,
            momentum: 0.9,
            gradient_clip: 5.0,
            epsilon_start: 1.0,
            epsilon_final: 0.05,
            exploration_fraction: 0.5,
            warmup_steps: 500,
            train_every: 1,
            seed: 0,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::InvalidConfig(m.into()));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must be in [0, 1)");
        }
        if self.buffer_capacity == 0 || self.batch_size == 0 || self.sync_every == 0 || self.train_every == 0
        {
            return bad("buffer_capacity, batch_size, sync_every and train_every must be ≥ 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be > 0");
        }
        let eps = [self.epsilon_start, self.epsilon_final, self.exploration_fraction];
        if eps.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return bad("epsilon values and exploration_fraction must be in [0, 1]");
        }
        if self.hidden.contains(&0) {
            return bad("hidden sizes must be positive");
        }
        Ok(())
    }

    /// ε after `step` of `total` steps.
    pub fn epsilon(&self, step: usize, total: usize) -> f64 {
        let span = self.exploration_fraction * total as f64;
        if span <= 0.0 {
            return self.epsilon_final;
        }
        let frac = (step as f64 / span).min(1.0);
        self.epsilon_start + frac * (self.epsilon_final - self.epsilon_start)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub episode_returns: Vec<f64>,
    /// Mean TD loss per episode (0 before the first update).
    pub episode_losses: Vec<f64>,
    pub steps: usize,
    pub updates: usize,
    pub final_epsilon: f64,
}

/// Double-DQN training. Returns the online network and a per-episode log.
pub fn train_dqn<E: Environment>(
    env: &mut E,
    config: &DqnConfig,
) -> Result<(QNetwork, TrainingLog), AgentError> {
    config.validate()?;
    let mut rng = rng::seeded(config.seed);
    let mut online = QNetwork::new(env.state_dim(), &config.hidden, env.n_actions(), &mut rng);
    let mut target = online.clone();
    let mut opt = Momentum::new(config.momentum, config.gradient_clip);
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let total = config.episodes * config.max_episode_steps;
    let mut log = TrainingLog {
        episode_returns: Vec::with_capacity(config.episodes),
        episode_losses: Vec::with_capacity(config.episodes),
        steps: 0,
        updates: 0,
        final_epsilon: config.epsilon(0, total),
    };

    for _ in 0..config.episodes {
        let mut state = env.reset(&mut rng);
        let mut ret = 0.0;
        let (mut loss_sum, mut loss_n) = (0.0, 0usize);
        for _ in 0..config.max_episode_steps {
            let eps = config.epsilon(log.steps, total);
            log.final_epsilon = eps;
            let action = select_action(&online, &state, eps, &mut rng);
            let out = env.step(action)?;
            ret += out.reward;
            buffer.push(Transition {
                state: std::mem::take(&mut state),
                action,
                reward: out.reward,
                next_state: out.next_state.clone(),
                terminal: out.terminal,
            });
            state = out.next_state;
            log.steps += 1;

            if buffer.len() >= config.warmup_steps.max(1) && log.steps.is_multiple_of(config.train_every) {
                let batch = buffer.sample(config.batch_size, &mut rng);
                let (loss, grad) = td_loss_and_gradients(&online, &target, &batch, config.gamma);
                if !loss.is_finite() {
                    return Err(AgentError::Diverged { step: log.steps });
                }
                opt.step(&mut online, &grad, config.lr);
                if !online.all_finite() {
                    return Err(AgentError::Diverged { step: log.steps });
                }
                loss_sum += loss;
                loss_n += 1;
                log.updates += 1;
            }
            if log.steps.is_multiple_of(config.sync_every) {
                target = online.clone();
            }
            if out.terminal || out.truncated {
                break;
            }
        }
        log.episode_returns.push(ret);
        log.episode_losses
            .push(if loss_n > 0 { loss_sum / loss_n as f64 } else { 0.0 });
    }
    Ok((online, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::qnet::argmax;
    use rand::Rng as _;

    /// Small deterministic MDP with one-hot states.
    #[derive(Clone)]
    struct TabularMdp {
        next: Vec<Vec<usize>>,
        reward: Vec<Vec<f64>>,
        terminal: Vec<bool>,
        current: usize,
    }

    impl TabularMdp {
        fn n_states(&self) -> usize {
            self.next.len()
        }

        fn one_hot(&self, s: usize) -> Vec<f64> {
            (0..self.n_states())
                .map(|i| if i == s { 1.0 } else { 0.0 })
                .collect()
        }

        /// Optimal greedy action per non-terminal state by value iteration.
        fn oracle(&self, gamma: f64) -> Vec<usize> {
            let n = self.n_states();
            let mut v = vec![0.0; n];
            for _ in 0..2000 {
                v = (0..n)
                    .map(|s| {
                        if self.terminal[s] {
                            return 0.0;
                        }
                        (0..self.next[s].len())
                            .map(|a| self.reward[s][a] + gamma * v[self.next[s][a]])
                            .fold(f64::NEG_INFINITY, f64::max)
                    })
                    .collect();
            }
            (0..n)
                .map(|s| {
                    let q: Vec<f64> = (0..self.next[s].len())
                        .map(|a| self.reward[s][a] + gamma * v[self.next[s][a]])
                        .collect();
                    argmax(&q)
                })
                .collect()
        }
    }

    impl Environment for TabularMdp {
        fn state_dim(&self) -> usize {
            self.n_states()
        }

        fn n_actions(&self) -> usize {
            self.next[0].len()
        }

        fn reset(&mut self, rng: &mut Rng) -> Vec<f64> {
            let starts: Vec<usize> = (0..self.n_states()).filter(|&s| !self.terminal[s]).collect();
            self.current = starts[rng.random_range(0..starts.len())];
            self.one_hot(self.current)
        }

        fn step(&mut self, action: usize) -> Result<EnvStep, AgentError> {
            let s = self.current;
            self.current = self.next[s][action];
            Ok(EnvStep {
                next_state: self.one_hot(self.current),
                reward: self.reward[s][action],
                terminal: self.terminal[self.current],
                truncated: false,
            })
        }
    }

    fn toy_config(seed: u64) -> DqnConfig {
        DqnConfig {
            episodes: 300,
            max_episode_steps: 20,
            hidden: vec![16],
            gamma: 0.9,
            buffer_capacity: 2000,
            batch_size: 32,
            sync_every: 50,
            lr: 0.01,
            warmup_steps: 100,
            seed,
            ..DqnConfig::default()
        }
    }

    fn greedy(q: &QNetwork, mdp: &TabularMdp) -> Vec<usize> {
        (0..mdp.n_states())
            .map(|s| argmax(&q.q_values(&mdp.one_hot(s))))
            .collect()
    }

    fn check(mdp: TabularMdp, seed: u64) {
        let cfg = toy_config(seed);
        let oracle = mdp.oracle(cfg.gamma);
        let (q, _) = train_dqn(&mut mdp.clone(), &cfg).unwrap();
        let got = greedy(&q, &mdp);
        for s in 0..mdp.n_states() {
            if !mdp.terminal[s] {
                assert_eq!(got[s], oracle[s], "state {s}: got {got:?}, oracle {oracle:?}");
            }
        }
    }

    #[test]
    fn two_state_mdp_learns_rewarded_action() {
        let mdp = TabularMdp {
            next: vec![vec![1, 0], vec![0, 1]],
            reward: vec![vec![1.0, 0.0], vec![1.0, 0.0]],
            terminal: vec![false, false],
            current: 0,
        };
        assert_eq!(mdp.oracle(0.9), vec![0, 0]);
        check(mdp, 1);
    }

    #[test]
    fn delayed_reward_chain() {
        // Moving right (action 1) pays only on reaching the end.
        let mdp = TabularMdp {
            next: vec![vec![0, 1], vec![0, 2], vec![1, 3], vec![3, 3]],
            reward: vec![vec![0.1, 0.0], vec![0.1, 0.0], vec![0.1, 2.0], vec![0.0, 0.0]],
            terminal: vec![false, false, false, true],
            current: 0,
        };
        assert_eq!(&mdp.oracle(0.9)[..3], &[1, 1, 1]);
        check(mdp, 2);
    }

    #[test]
    fn zero_episodes_return_initial_network() {
        let mut mdp = TabularMdp {
            next: vec![vec![0, 0]],
            reward: vec![vec![0.0, 1.0]],
            terminal: vec![false],
            current: 0,
        };
        let cfg = DqnConfig {
            episodes: 0,
            hidden: vec![4],
            ..DqnConfig::default()
        };
        let (q, log) = train_dqn(&mut mdp, &cfg).unwrap();
        let init = QNetwork::new(1, &[4], 2, &mut rng::seeded(cfg.seed));
        assert_eq!(q, init);
        assert_eq!(log.steps, 0);
    }

    #[test]
    fn training_is_deterministic_and_epsilon_decays() {
        let mdp = TabularMdp {
            next: vec![vec![1, 0], vec![0, 1]],
            reward: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            terminal: vec![false, false],
            current: 0,
        };
        let cfg = DqnConfig {
            episodes: 20,
            ..toy_config(5)
        };
        let (q1, l1) = train_dqn(&mut mdp.clone(), &cfg).unwrap();
        let (q2, l2) = train_dqn(&mut mdp.clone(), &cfg).unwrap();
        assert_eq!((q1, l1), (q2, l2));
        assert_eq!(cfg.epsilon(0, 100), 1.0);
        assert!((cfg.epsilon(50, 100) - 0.05).abs() < 1e-12);
        assert!((cfg.epsilon(99, 100) - 0.05).abs() < 1e-12);
        assert!((cfg.epsilon(25, 100) - 0.525).abs() < 1e-12);
    }
}
