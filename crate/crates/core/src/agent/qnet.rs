use ndarray::{Array2, ArrayView1};
use rand::Rng as _;

use super::replay::Transition;
use crate::nn::{Mlp, ParamRef, Parameters};
use crate::rng::Rng;
use crate::simenv::N_ACTIONS;

use super::state::STATE_DIM;

/// Feed-forward action-value function: ReLU hidden layers, linear output with
/// one value per action.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    pub mlp: Mlp,
}

impl QNetwork {
    pub fn new(state_dim: usize, hidden: &[usize], n_actions: usize, rng: &mut Rng) -> Self {
        let mut sizes = vec![state_dim];
        sizes.extend(hidden);
        sizes.push(n_actions);
        Self {
            mlp: Mlp::init(&sizes, rng),
        }
    }

    /// 42 → 64 → 64 → 16.
    pub fn standard(rng: &mut Rng) -> Self {
        Self::new(STATE_DIM, &[64, 64], N_ACTIONS, rng)
    }

    pub fn state_dim(&self) -> usize {
        self.mlp.layers.first().map_or(0, |l| l.input_size())
    }

    pub fn n_actions(&self) -> usize {
        self.mlp.output_size()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.mlp.sizes()
    }

    pub fn q_values(&self, state: &[f64]) -> Vec<f64> {
        let x = ArrayView1::from(state).insert_axis(ndarray::Axis(0));
        self.mlp.forward(x).row(0).to_vec()
    }

    pub fn q_batch(&self, states: &Array2<f64>) -> Array2<f64> {
        self.mlp.forward(states.view())
    }
}

impl Parameters for QNetwork {
    fn params(&self) -> Vec<ParamRef<'_>> {
        self.mlp.named_params("dense")
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.mlp.params_mut_flat()
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy: a uniform random action with probability `epsilon`, otherwise
/// the greedy one.
pub fn select_action(q: &QNetwork, state: &[f64], epsilon: f64, rng: &mut Rng) -> usize {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        rng.random_range(0..q.n_actions())
    } else {
        argmax(&q.q_values(state))
    }
}

/// Double-DQN target: the online network picks the next action, the target
/// network values it.
pub fn dqn_target(
    r: f64,
    next_state: &[f64],
    terminal: bool,
    online: &QNetwork,
    target: &QNetwork,
    gamma: f64,
) -> f64 {
    if terminal {
        return r;
    }
    let a = argmax(&online.q_values(next_state));
    r + gamma * target.q_values(next_state)[a]
}

fn stack(rows: impl Iterator<Item = Vec<f64>>, n: usize, dim: usize) -> Array2<f64> {
    let flat: Vec<f64> = rows.flatten().collect();
    Array2::from_shape_vec((n, dim), flat).expect("rows share the state dimension")
}

/// Mean squared TD error over a batch and its gradient for `online`.
pub fn td_loss_and_gradients(
    online: &QNetwork,
    target: &QNetwork,
    batch: &[&Transition],
    gamma: f64,
) -> (f64, QNetwork) {
    let n = batch.len();
    let dim = online.state_dim();
    let states = stack(batch.iter().map(|t| t.state.clone()), n, dim);
    let nexts = stack(batch.iter().map(|t| t.next_state.clone()), n, dim);
    let q_next_online = online.q_batch(&nexts);
    let q_next_target = target.q_batch(&nexts);
    let (q, cache) = online.mlp.forward_train(states.view(), None);
    let mut dout = Array2::zeros(q.dim());
    let mut loss = 0.0;
    for (i, t) in batch.iter().enumerate() {
        let y = if t.terminal {
            t.reward
        } else {
            let a = argmax(q_next_online.row(i).as_slice().expect("contiguous"));
            t.reward + gamma * q_next_target[[i, a]]
        };
        let err = q[[i, t.action]] - y;
        loss += err * err;
        dout[[i, t.action]] = 2.0 * err / n as f64;
    }
    let mut grad = QNetwork {
        mlp: online.mlp.zeros_like(),
    };
    online.mlp.backward(&cache, dout, &mut grad.mlp);
    (loss / n as f64, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Dense;
    use crate::rng::seeded;
    use ndarray::Array1;

    /// One linear layer whose output ignores the input.
    fn constant_net(values: &[f64]) -> QNetwork {
        let mut d = Dense::zeros(1, values.len());
        d.b = Array1::from_vec(values.to_vec());
        QNetwork {
            mlp: Mlp { layers: vec![d] },
        }
    }

    #[test]
    fn greedy_picks_argmax_with_lowest_tie() {
        let mut rng = seeded(0);
        let mut q = vec![0.0; 16];
        q[..3].copy_from_slice(&[0.1, 0.9, 0.2]);
        assert_eq!(select_action(&constant_net(&q), &[0.0], 0.0, &mut rng), 1);
        assert_eq!(select_action(&constant_net(&[0.5; 16]), &[0.0], 0.0, &mut rng), 0);
        let mut tie = vec![0.0; 16];
        tie[4] = 1.0;
        tie[9] = 1.0;
        assert_eq!(select_action(&constant_net(&tie), &[0.0], 0.0, &mut rng), 4);
    }

    #[test]
    fn double_dqn_target_uses_online_argmax() {
        let online = constant_net(&[0.2, 0.5]);
        let target = constant_net(&[0.7, 0.3]);
        assert!((dqn_target(1.0, &[0.0], false, &online, &target, 0.9) - 1.27).abs() < 1e-12);
        assert_eq!(dqn_target(1.0, &[0.0], true, &online, &target, 0.9), 1.0);
        assert_eq!(dqn_target(0.5, &[0.0], false, &online, &target, 0.0), 0.5);
    }

    #[test]
    fn uniform_exploration_passes_chi_square() {
        let q = constant_net(&[0.0; 16]);
        let mut rng = seeded(42);
        let mut counts = [0usize; 16];
        let draws: Vec<usize> = (0..16_000)
            .map(|_| select_action(&q, &[0.0], 1.0, &mut rng))
            .collect();
        for &a in &draws {
            counts[a] += 1;
        }
        let expected = 1000.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 99th percentile of χ² with 15 degrees of freedom.
        assert!(chi2 < 30.578, "chi2 = {chi2}");
        let mut rng = seeded(42);
        let again: Vec<usize> = (0..16_000)
            .map(|_| select_action(&q, &[0.0], 1.0, &mut rng))
            .collect();
        assert_eq!(draws, again);
    }

    #[test]
    fn td_gradient_matches_finite_differences() {
        let mut rng = seeded(3);
        let online = QNetwork::new(3, &[5], 4, &mut rng);
        let target = QNetwork::new(3, &[5], 4, &mut rng);
        let batch: Vec<Transition> = (0..6)
            .map(|i| Transition {
                state: vec![0.1 * i as f64, -0.3, 0.5],
                action: i % 4,
                reward: 0.2 * i as f64,
                next_state: vec![0.4, 0.1 * i as f64, -0.2],
                terminal: i == 5,
            })
            .collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let (_, grad) = td_loss_and_gradients(&online, &target, &refs, 0.9);
        // The target is held fixed (semi-gradient), so perturb only the
        // prediction side: recompute y from the unperturbed network.
        let ys: Vec<f64> = batch
            .iter()
            .map(|t| dqn_target(t.reward, &t.next_state, t.terminal, &online, &target, 0.9))
            .collect();
        let loss = |net: &QNetwork| {
            batch
                .iter()
                .zip(&ys)
                .map(|(t, y)| (net.q_values(&t.state)[t.action] - y).powi(2))
                .sum::<f64>()
                / batch.len() as f64
        };
        let analytic: Vec<f64> = grad.params().iter().flat_map(|p| p.values.to_vec()).collect();
        let mut probe = online.clone();
        let mut idx = 0;
        for t in 0..probe.params_mut().len() {
            for k in 0..probe.params_mut()[t].len() {
                let orig = probe.params_mut()[t][k];
                probe.params_mut()[t][k] = orig + 1e-6;
                let lp = loss(&probe);
                probe.params_mut()[t][k] = orig - 1e-6;
                let lm = loss(&probe);
                probe.params_mut()[t][k] = orig;
                let num = (lp - lm) / 2e-6;
                assert!((num - analytic[idx]).abs() < 1e-6, "{num} vs {}", analytic[idx]);
                idx += 1;
            }
        }
    }
}
