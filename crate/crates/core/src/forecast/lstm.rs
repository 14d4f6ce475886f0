//! One LSTM layer over a batch of sequences, with backprop through time.
//!
//! Gate pre-activations are stacked in the order input, forget, candidate,
//! output: `z = x Wᵀ + h Uᵀ + b` with `W: 4h × in`, `U: 4h × h`, `b: 4h`.

use ndarray::{s, Array1, Array2, Axis, Zip};

use crate::nn::{slice1, slice1_mut, slice2, slice2_mut, uniform, ParamRef};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    pub w: Array2<f64>,
    pub u: Array2<f64>,
    pub b: Array1<f64>,
}

pub(crate) struct LstmCache {
    xs: Vec<Array2<f64>>,
    /// `hs[t]` is the hidden state after step `t`.
    hs: Vec<Array2<f64>>,
    cs: Vec<Array2<f64>>,
    /// Activated gates per step, `B × 4h` in i, f, g, o order.
    gates: Vec<Array2<f64>>,
    tanh_c: Vec<Array2<f64>>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmLayer {
    /// Weights uniform in `±1/√(in + h)`; biases zero except the forget gate,
    /// which starts at 1.
    pub fn init(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / ((input + hidden) as f64).sqrt();
        let mut b = Array1::zeros(4 * hidden);
        b.slice_mut(s![hidden..2 * hidden]).fill(1.0);
        Self {
            w: Array2::from_shape_simple_fn((4 * hidden, input), || uniform(rng, bound)),
            u: Array2::from_shape_simple_fn((4 * hidden, hidden), || uniform(rng, bound)),
            b,
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w: Array2::zeros((4 * hidden, input)),
            u: Array2::zeros((4 * hidden, hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    pub fn input_size(&self) -> usize {
        self.w.ncols()
    }

    pub fn hidden_size(&self) -> usize {
        self.u.ncols()
    }

    pub fn forget_bias(&self) -> ndarray::ArrayView1<'_, f64> {
        let h = self.hidden_size();
        self.b.slice(s![h..2 * h])
    }

    fn step(
        &self,
        x: &Array2<f64>,
        h_prev: &Array2<f64>,
        c_prev: &Array2<f64>,
    ) -> (Array2<f64>, Array2<f64>, Array2<f64>, Array2<f64>) {
        let hs = self.hidden_size();
        let mut z = x.dot(&self.w.t());
        z += &h_prev.dot(&self.u.t());
        z += &self.b;
        for mut row in z.rows_mut() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = if (2 * hs..3 * hs).contains(&k) {
                    v.tanh()
                } else {
                    sigmoid(*v)
                };
            }
        }
        let i = z.slice(s![.., 0..hs]);
        let f = z.slice(s![.., hs..2 * hs]);
        let g = z.slice(s![.., 2 * hs..3 * hs]);
        let o = z.slice(s![.., 3 * hs..4 * hs]);
        let mut c = Array2::zeros(c_prev.dim());
        Zip::from(&mut c)
            .and(&f)
            .and(c_prev)
            .and(&i)
            .and(&g)
            .for_each(|c, &f, &cp, &i, &g| *c = f * cp + i * g);
        let tc = c.mapv(f64::tanh);
        let h = &o * &tc;
        (h, c, z, tc)
    }

    /// Runs the layer over `xs` (one `B × in` matrix per step) from zero
    /// state. Returns the hidden state at every step.
    pub fn forward(&self, xs: &[Array2<f64>]) -> Vec<Array2<f64>> {
        self.forward_cached(xs.to_vec()).1.hs
    }

    pub(crate) fn forward_cached(&self, xs: Vec<Array2<f64>>) -> (Vec<Array2<f64>>, LstmCache) {
        let batch = xs.first().map_or(0, |x| x.nrows());
        let hsz = self.hidden_size();
        let mut h = Array2::zeros((batch, hsz));
        let mut c = Array2::zeros((batch, hsz));
        let mut cache = LstmCache {
            hs: Vec::with_capacity(xs.len()),
            cs: Vec::with_capacity(xs.len()),
            gates: Vec::with_capacity(xs.len()),
            tanh_c: Vec::with_capacity(xs.len()),
            xs: Vec::new(),
        };
        for x in &xs {
            let (h2, c2, gates, tc) = self.step(x, &h, &c);
            h = h2;
            c = c2;
            cache.hs.push(h.clone());
            cache.cs.push(c.clone());
            cache.gates.push(gates);
            cache.tanh_c.push(tc);
        }
        cache.xs = xs;
        (cache.hs.clone(), cache)
    }

    /// BPTT. `dhs[t]` is the loss gradient arriving at `h_t` from above
    /// (`None` for none). Adds into `grad` and returns `dL/dx_t` per step.
    pub(crate) fn backward(
        &self,
        cache: &LstmCache,
        dhs: &[Option<Array2<f64>>],
        grad: &mut LstmLayer,
    ) -> Vec<Array2<f64>> {
        let steps = cache.xs.len();
        let hs = self.hidden_size();
        let batch = cache.xs.first().map_or(0, |x| x.nrows());
        let mut dh_next = Array2::<f64>::zeros((batch, hs));
        let mut dc_next = Array2::<f64>::zeros((batch, hs));
        let zeros = Array2::<f64>::zeros((batch, hs));
        let mut dxs = vec![Array2::zeros((0, 0)); steps];
        let mut dz = Array2::<f64>::zeros((batch, 4 * hs));

        for t in (0..steps).rev() {
            let mut dh = dh_next;
            if let Some(d) = &dhs[t] {
                dh += d;
            }
            let gates = &cache.gates[t];
            let tc = &cache.tanh_c[t];
            let c_prev = if t > 0 { &cache.cs[t - 1] } else { &zeros };
            let h_prev = if t > 0 { &cache.hs[t - 1] } else { &zeros };

            for r in 0..batch {
                let g_row = gates.row(r);
                for k in 0..hs {
                    let i = g_row[k];
                    let f = g_row[hs + k];
                    let g = g_row[2 * hs + k];
                    let o = g_row[3 * hs + k];
                    let tck = tc[[r, k]];
                    let dhk = dh[[r, k]];
                    let dc = dc_next[[r, k]] + dhk * o * (1.0 - tck * tck);
                    dz[[r, k]] = dc * g * i * (1.0 - i);
                    dz[[r, hs + k]] = dc * c_prev[[r, k]] * f * (1.0 - f);
                    dz[[r, 2 * hs + k]] = dc * i * (1.0 - g * g);
                    dz[[r, 3 * hs + k]] = dhk * tck * o * (1.0 - o);
                    dc_next[[r, k]] = dc * f;
                }
            }
            grad.w += &dz.t().dot(&cache.xs[t]);
            grad.u += &dz.t().dot(h_prev);
            grad.b += &dz.sum_axis(Axis(0));
            dxs[t] = dz.dot(&self.w);
            dh_next = dz.dot(&self.u);
        }
        dxs
    }

    pub(crate) fn named_params<'a>(&'a self, prefix: &str) -> [ParamRef<'a>; 3] {
        [
            ParamRef {
                name: format!("{prefix}.w"),
                shape: vec![self.w.nrows(), self.w.ncols()],
                values: slice2(&self.w),
            },
            ParamRef {
                name: format!("{prefix}.u"),
                shape: vec![self.u.nrows(), self.u.ncols()],
                values: slice2(&self.u),
            },
            ParamRef {
                name: format!("{prefix}.b"),
                shape: vec![self.b.len()],
                values: slice1(&self.b),
            },
        ]
    }

    pub(crate) fn params_mut(&mut self) -> [&mut [f64]; 3] {
        [
            slice2_mut(&mut self.w),
            slice2_mut(&mut self.u),
            slice1_mut(&mut self.b),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn zero_weights_keep_state_at_zero() {
        let layer = LstmLayer::zeros(3, 2);
        let xs = vec![Array2::from_elem((1, 3), 0.7); 4];
        for h in layer.forward(&xs) {
            assert!(h.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let layer = LstmLayer::init(5, 7, &mut seeded(2));
        assert!(layer.forget_bias().iter().all(|&b| b == 1.0));
        assert!(layer.b.slice(s![0..7]).iter().all(|&b| b == 0.0));
        let bound = 1.0 / 12f64.sqrt();
        assert!(layer.w.iter().chain(layer.u.iter()).all(|v| v.abs() <= bound));
    }

    #[test]
    fn single_unit_matches_hand_recurrence() {
        let mut layer = LstmLayer::zeros(1, 1);
        // i, f, g, o weights on x; no recurrence.
        layer.w = Array2::from_shape_vec((4, 1), vec![0.5, -0.3, 0.8, 0.2]).unwrap();
        layer.b = Array1::from_vec(vec![0.1, 0.0, -0.1, 0.0]);
        let xs = vec![Array2::from_elem((1, 1), 1.0), Array2::from_elem((1, 1), -2.0)];
        let hs = layer.forward(&xs);
        let mut c = 0.0;
        for (x, h) in [1.0f64, -2.0].iter().zip(&hs) {
            let i = sigmoid(0.5 * x + 0.1);
            let f = sigmoid(-0.3 * x);
            let g = (0.8 * x - 0.1).tanh();
            let o = sigmoid(0.2 * x);
            c = f * c + i * g;
            let expect = o * f64::tanh(c);
            assert!((h[[0, 0]] - expect).abs() < 1e-15);
        }
    }
}
