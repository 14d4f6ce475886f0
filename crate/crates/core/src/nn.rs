//! Small dense-network toolkit shared by the forecaster and the Q-network:
//! fully connected layers, a ReLU MLP with manual backprop, momentum SGD with
//! global-norm clipping, and the JSON tensor record used by checkpoints.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

/// Borrowed view of one named parameter tensor.
pub struct ParamRef<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: &'a [f64],
}

/// Anything made of flat `f64` tensors in a fixed order.
pub trait Parameters {
    fn params(&self) -> Vec<ParamRef<'_>>;
    fn params_mut(&mut self) -> Vec<&mut [f64]>;

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.values.len()).sum()
    }

    fn all_finite(&self) -> bool {
        self.params()
            .iter()
            .all(|p| p.values.iter().all(|v| v.is_finite()))
    }

    fn to_records(&self) -> Vec<TensorRecord> {
        self.params()
            .into_iter()
            .map(|p| TensorRecord {
                name: p.name,
                shape: p.shape,
                values: p.values.to_vec(),
            })
            .collect()
    }

    /// Overwrites every tensor from `records`, matching by name and shape.
    fn load_records(&mut self, records: &[TensorRecord]) -> Result<(), String> {
        let expected: Vec<(String, Vec<usize>)> =
            self.params().into_iter().map(|p| (p.name, p.shape)).collect();
        if expected.len() != records.len() {
            return Err(format!(
                "expected {} tensors, found {}",
                expected.len(),
                records.len()
            ));
        }
        let mut sources = Vec::with_capacity(expected.len());
        for (name, shape) in &expected {
            let rec = records
                .iter()
                .find(|r| &r.name == name)
                .ok_or_else(|| format!("missing tensor {name:?}"))?;
            if &rec.shape != shape {
                return Err(format!(
                    "tensor {name:?} has shape {:?}, expected {shape:?}",
                    rec.shape
                ));
            }
            if rec.values.len() != shape.iter().product::<usize>() {
                return Err(format!("tensor {name:?} has {} values", rec.values.len()));
            }
            if rec.values.iter().any(|v| !v.is_finite()) {
                return Err(format!("tensor {name:?} has non-finite values"));
            }
            sources.push(&rec.values);
        }
        for (dst, src) in self.params_mut().into_iter().zip(sources) {
            dst.copy_from_slice(src);
        }
        Ok(())
    }
}

/// Row-major tensor as stored in JSON checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

pub(crate) fn slice2(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("parameters are standard layout")
}

pub(crate) fn slice2_mut(a: &mut Array2<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("parameters are standard layout")
}

pub(crate) fn slice1(a: &Array1<f64>) -> &[f64] {
    a.as_slice().expect("parameters are standard layout")
}

pub(crate) fn slice1_mut(a: &mut Array1<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("parameters are standard layout")
}

pub(crate) fn uniform(rng: &mut Rng, bound: f64) -> f64 {
    rng.random_range(-bound..=bound)
}

/// Fully connected layer, `y = x Wᵀ + b` with `W` stored `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    /// Weights and biases uniform in `±1/√fan_in`.
    pub fn init(input: usize, output: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        Self {
            w: Array2::from_shape_simple_fn((output, input), || uniform(rng, bound)),
            b: Array1::from_shape_simple_fn(output, || uniform(rng, bound)),
        }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            w: Array2::zeros((output, input)),
            b: Array1::zeros(output),
        }
    }

    pub fn input_size(&self) -> usize {
        self.w.ncols()
    }

    pub fn output_size(&self) -> usize {
        self.w.nrows()
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        x.dot(&self.w.t()) + &self.b
    }

    /// Accumulates `dW`, `db` into `grad` and returns `dx`.
    pub fn backward(&self, x: ArrayView2<'_, f64>, dy: ArrayView2<'_, f64>, grad: &mut Dense) -> Array2<f64> {
        grad.w += &dy.t().dot(&x);
        grad.b += &dy.sum_axis(Axis(0));
        dy.dot(&self.w)
    }
}

/// Inverted dropout mask: kept units scale by `1/(1-p)`.
pub(crate) fn dropout_mask(shape: (usize, usize), p: f64, rng: &mut Rng) -> Array2<f64> {
    let keep = 1.0 / (1.0 - p);
    Array2::from_shape_simple_fn(shape, || if rng.random::<f64>() < p { 0.0 } else { keep })
}

/// Stack of dense layers, ReLU between them and a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Activations recorded by [`Mlp::forward_train`].
pub struct MlpCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    masks: Vec<Option<Array2<f64>>>,
}

impl Mlp {
    pub fn init(sizes: &[usize], rng: &mut Rng) -> Self {
        Self {
            layers: sizes.windows(2).map(|w| Dense::init(w[0], w[1], rng)).collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.input_size(), l.output_size()))
                .collect(),
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.layers.iter().map(|l| l.input_size()).collect();
        if let Some(last) = self.layers.last() {
            s.push(last.output_size());
        }
        s
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map_or(0, |l| l.output_size())
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut h = x.to_owned();
        let last = self.layers.len().saturating_sub(1);
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(h.view());
            if i < last {
                h.mapv_inplace(|v| v.max(0.0));
            }
        }
        h
    }

    /// Forward pass keeping what backprop needs. With `dropout`, hidden
    /// activations are masked (inverted dropout).
    pub fn forward_train(
        &self,
        x: ArrayView2<'_, f64>,
        mut dropout: Option<(f64, &mut Rng)>,
    ) -> (Array2<f64>, MlpCache) {
        let mut cache = MlpCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
            masks: Vec::with_capacity(self.layers.len()),
        };
        let mut h = x.to_owned();
        let last = self.layers.len().saturating_sub(1);
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(h.view());
            cache.inputs.push(h);
            if i < last {
                let mut a = z.mapv(|v| v.max(0.0));
                let mask = match dropout.as_mut() {
                    Some((p, rng)) if *p > 0.0 => {
                        let m = dropout_mask(a.dim(), *p, rng);
                        a *= &m;
                        Some(m)
                    }
                    _ => None,
                };
                cache.masks.push(mask);
                cache.pre.push(z);
                h = a;
            } else {
                cache.masks.push(None);
                cache.pre.push(z.clone());
                h = z;
            }
        }
        (h, cache)
    }

    /// Backprop of `dout` through the cached pass. Adds into `grad`; returns
    /// the gradient with respect to the input.
    pub fn backward(&self, cache: &MlpCache, dout: Array2<f64>, grad: &mut Mlp) -> Array2<f64> {
        let mut d = dout;
        let last = self.layers.len().saturating_sub(1);
        for i in (0..self.layers.len()).rev() {
            if i < last {
                if let Some(m) = &cache.masks[i] {
                    d *= m;
                }
                ndarray::Zip::from(&mut d).and(&cache.pre[i]).for_each(|g, &z| {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                });
            }
            d = self.layers[i].backward(cache.inputs[i].view(), d.view(), &mut grad.layers[i]);
        }
        d
    }

    pub fn named_params<'a>(&'a self, prefix: &str) -> Vec<ParamRef<'a>> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for (i, l) in self.layers.iter().enumerate() {
            out.push(ParamRef {
                name: format!("{prefix}{i}.w"),
                shape: vec![l.w.nrows(), l.w.ncols()],
                values: slice2(&l.w),
            });
            out.push(ParamRef {
                name: format!("{prefix}{i}.b"),
                shape: vec![l.b.len()],
                values: slice1(&l.b),
            });
        }
        out
    }

    pub fn params_mut_flat(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for l in &mut self.layers {
            out.push(slice2_mut(&mut l.w));
            out.push(slice1_mut(&mut l.b));
        }
        out
    }
}

impl Parameters for Mlp {
    fn params(&self) -> Vec<ParamRef<'_>> {
        self.named_params("dense")
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.params_mut_flat()
    }
}

pub fn global_norm<P: Parameters + ?Sized>(grads: &P) -> f64 {
    grads
        .params()
        .iter()
        .flat_map(|p| p.values.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt()
}

/// SGD with classical momentum and global-norm gradient clipping.
#[derive(Debug, Clone)]
pub struct Momentum {
    pub momentum: f64,
    pub clip_norm: f64,
    velocity: Vec<Vec<f64>>,
}

impl Momentum {
    pub fn new(momentum: f64, clip_norm: f64) -> Self {
        Self {
            momentum,
            clip_norm,
            velocity: Vec::new(),
        }
    }

    /// `v ← μv − lr·ĝ; θ ← θ + v` where `ĝ` is `g` rescaled to norm at most
    /// `clip_norm`. Returns the unclipped gradient norm.
    pub fn step<P: Parameters + ?Sized, G: Parameters + ?Sized>(
        &mut self,
        params: &mut P,
        grads: &G,
        lr: f64,
    ) -> f64 {
        let norm = global_norm(grads);
        let scale = if self.clip_norm > 0.0 && norm > self.clip_norm {
            self.clip_norm / norm
        } else {
            1.0
        };
        let grads = grads.params();
        let targets = params.params_mut();
        if self.velocity.len() != targets.len() {
            self.velocity = targets.iter().map(|t| vec![0.0; t.len()]).collect();
        }
        for ((theta, g), v) in targets.into_iter().zip(&grads).zip(&mut self.velocity) {
            for ((t, &gi), vi) in theta.iter_mut().zip(g.values).zip(v.iter_mut()) {
                *vi = self.momentum * *vi - lr * scale * gi;
                *t += *vi;
            }
        }
        norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use ndarray::array;

    fn loss(m: &Mlp, x: &Array2<f64>, y: &Array2<f64>) -> f64 {
        let p = m.forward(x.view());
        (&p - y).mapv(|v| v * v).sum() / 2.0
    }

    #[test]
    fn mlp_gradients_match_finite_differences() {
        let mut rng = seeded(1);
        let m = Mlp::init(&[3, 5, 4, 2], &mut rng);
        let x = array![[0.3, -0.2, 0.9], [1.1, 0.4, -0.7]];
        let y = array![[0.5, -0.1], [0.2, 0.3]];
        let (out, cache) = m.forward_train(x.view(), None);
        let mut grad = m.zeros_like();
        m.backward(&cache, &out - &y, &mut grad);

        let eps = 1e-6;
        let mut probe = m.clone();
        let analytic: Vec<f64> = grad.params().iter().flat_map(|p| p.values.to_vec()).collect();
        for (idx, &a) in analytic.iter().enumerate() {
            let orig = {
                let mut flat = probe.params_mut();
                let (t, i) = locate(&mut flat, idx);
                let o = t[i];
                t[i] = o + eps;
                o
            };
            let up = loss(&probe, &x, &y);
            {
                let mut flat = probe.params_mut();
                let (t, i) = locate(&mut flat, idx);
                t[i] = orig - eps;
            }
            let down = loss(&probe, &x, &y);
            {
                let mut flat = probe.params_mut();
                let (t, i) = locate(&mut flat, idx);
                t[i] = orig;
            }
            let numeric = (up - down) / (2.0 * eps);
            assert!(
                (a - numeric).abs() <= 1e-6 * (1.0 + a.abs().max(numeric.abs())),
                "param {idx}: {a} vs {numeric}"
            );
        }
    }

    fn locate<'a>(flat: &'a mut [&mut [f64]], mut idx: usize) -> (&'a mut [f64], usize) {
        for t in flat.iter_mut() {
            if idx < t.len() {
                return (&mut **t, idx);
            }
            idx -= t.len();
        }
        panic!("index out of range");
    }

    #[test]
    fn momentum_clips_to_norm() {
        let mut p = Mlp {
            layers: vec![Dense::zeros(1, 1)],
        };
        let mut g = p.zeros_like();
        g.layers[0].w[[0, 0]] = 30.0;
        g.layers[0].b[0] = 40.0;
        let mut opt = Momentum::new(0.0, 5.0);
        let norm = opt.step(&mut p, &g, 1.0);
        assert_eq!(norm, 50.0);
        assert!((p.layers[0].w[[0, 0]] + 3.0).abs() < 1e-12);
        assert!((p.layers[0].b[0] + 4.0).abs() < 1e-12);
    }

    #[test]
    fn records_round_trip() {
        let mut rng = seeded(4);
        let m = Mlp::init(&[4, 3, 2], &mut rng);
        let recs = m.to_records();
        let mut other = m.zeros_like();
        other.load_records(&recs).unwrap();
        assert_eq!(other, m);
        let mut bad = recs.clone();
        bad[0].shape = vec![9, 9];
        assert!(other.load_records(&bad).is_err());
    }
}
