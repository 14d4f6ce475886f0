use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::lstm::{LstmCache, LstmLayer};
use super::ForecastError;
use crate::nn::{dropout_mask, Mlp, Momentum, ParamRef, Parameters};
use crate::rng::{self, Rng};
use crate::trace::{ColumnScale, WindowedDataset, N_FEATURES};

/// Architecture of a forecaster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelShape {
    pub input_size: usize,
    pub lstm_sizes: Vec<usize>,
    pub dense_sizes: Vec<usize>,
    pub horizon: usize,
    pub dropout_rate: f64,
}

impl Default for ModelShape {
    fn default() -> Self {
        Self {
            input_size: N_FEATURES,
            lstm_sizes: vec![128, 256, 128],
            dense_sizes: vec![64, 32],
            horizon: 12,
            dropout_rate: 0.3,
        }
    }
}

impl ModelShape {
    /// Small configuration that trains in seconds. Dropout is lighter than
    /// the full model's: at this width 0.3 needs twice the epochs to fit.
    pub fn desk() -> Self {
        Self {
            lstm_sizes: vec![16, 32, 16],
            horizon: 6,
            dropout_rate: 0.1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ForecastError> {
        if self.lstm_sizes.is_empty() {
            return Err(ForecastError::InvalidConfig(
                "at least one LSTM layer is required".into(),
            ));
        }
        if self.input_size == 0
            || self.horizon == 0
            || self.lstm_sizes.contains(&0)
            || self.dense_sizes.contains(&0)
        {
            return Err(ForecastError::ZeroSizeLayer);
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(ForecastError::InvalidConfig(format!(
                "dropout_rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

/// Trainable tensors of a forecaster; also used as its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastParams {
    pub lstm: Vec<LstmLayer>,
    pub head: Mlp,
}

impl ForecastParams {
    pub fn zeros_like(&self) -> Self {
        Self {
            lstm: self
                .lstm
                .iter()
                .map(|l| LstmLayer::zeros(l.input_size(), l.hidden_size()))
                .collect(),
            head: self.head.zeros_like(),
        }
    }
}

impl Parameters for ForecastParams {
    fn params(&self) -> Vec<ParamRef<'_>> {
        let mut out = Vec::new();
        for (i, l) in self.lstm.iter().enumerate() {
            out.extend(l.named_params(&format!("lstm{i}")));
        }
        out.extend(self.head.named_params("dense"));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for l in &mut self.lstm {
            out.extend(l.params_mut());
        }
        out.extend(self.head.params_mut_flat());
        out
    }
}

/// Stacked LSTM followed by a ReLU MLP head with a linear `horizon` output.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastModel {
    pub shape: ModelShape,
    pub params: ForecastParams,
    /// Scale of the target column, used to report metrics in original units.
    pub scaler: Option<ColumnScale>,
    pub target_metric: String,
}

pub fn init_model(layer_sizes: &[usize], horizon: usize, seed: u64) -> Result<ForecastModel, ForecastError> {
    ForecastModel::init(
        ModelShape {
            lstm_sizes: layer_sizes.to_vec(),
            horizon,
            ..ModelShape::default()
        },
        seed,
    )
}

struct ForwardCache {
    lstm: Vec<LstmCache>,
    /// Dropout masks applied to each LSTM layer's outputs, per step.
    masks: Vec<Option<Vec<Array2<f64>>>>,
    head: crate::nn::MlpCache,
    steps: usize,
}

impl ForecastModel {
    pub fn init(shape: ModelShape, seed: u64) -> Result<Self, ForecastError> {
        shape.validate()?;
        let mut rng = rng::seeded(seed);
        let mut lstm = Vec::with_capacity(shape.lstm_sizes.len());
        let mut input = shape.input_size;
        for &h in &shape.lstm_sizes {
            lstm.push(LstmLayer::init(input, h, &mut rng));
            input = h;
        }
        let mut sizes = vec![input];
        sizes.extend(&shape.dense_sizes);
        sizes.push(shape.horizon);
        let head = Mlp::init(&sizes, &mut rng);
        Ok(Self {
            shape,
            params: ForecastParams { lstm, head },
            scaler: None,
            target_metric: "cpu_util".into(),
        })
    }

    pub fn horizon(&self) -> usize {
        self.shape.horizon
    }

    /// Dimension chain from input through every layer to the output.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.shape.input_size];
        d.extend(self.params.lstm.iter().map(|l| l.hidden_size()));
        d.extend(self.params.head.layers.iter().map(|l| l.output_size()));
        d
    }

    fn check_window(&self, w: &ArrayView2<'_, f64>) -> Result<(), ForecastError> {
        if w.ncols() != self.shape.input_size || w.nrows() == 0 {
            return Err(ForecastError::InvalidShape {
                expected: format!("T×{} with T ≥ 1", self.shape.input_size),
                actual: format!("{}×{}", w.nrows(), w.ncols()),
            });
        }
        Ok(())
    }

    fn step_inputs(&self, windows: &[ArrayView2<'_, f64>]) -> Result<Vec<Array2<f64>>, ForecastError> {
        let first = windows.first().ok_or(ForecastError::EmptyBatch)?;
        let steps = first.nrows();
        for w in windows {
            self.check_window(w)?;
            if w.nrows() != steps {
                return Err(ForecastError::InvalidShape {
                    expected: format!("{steps}×{}", self.shape.input_size),
                    actual: format!("{}×{}", w.nrows(), w.ncols()),
                });
            }
        }
        let batch = windows.len();
        Ok((0..steps)
            .map(|t| {
                let mut x = Array2::zeros((batch, self.shape.input_size));
                for (b, w) in windows.iter().enumerate() {
                    x.row_mut(b).assign(&w.row(t));
                }
                x
            })
            .collect())
    }

    fn forward_internal(
        &self,
        windows: &[ArrayView2<'_, f64>],
        mut dropout: Option<&mut Rng>,
    ) -> Result<(Array2<f64>, ForwardCache), ForecastError> {
        let mut xs = self.step_inputs(windows)?;
        let steps = xs.len();
        let p = self.shape.dropout_rate;
        let mut caches = Vec::with_capacity(self.params.lstm.len());
        let mut masks = Vec::with_capacity(self.params.lstm.len());
        for layer in &self.params.lstm {
            let (mut hs, cache) = layer.forward_cached(xs);
            caches.push(cache);
            match dropout.as_deref_mut() {
                Some(rng) if p > 0.0 => {
                    let m: Vec<Array2<f64>> = hs.iter().map(|h| dropout_mask(h.dim(), p, rng)).collect();
                    for (h, m) in hs.iter_mut().zip(&m) {
                        *h *= m;
                    }
                    masks.push(Some(m));
                }
                _ => masks.push(None),
            }
            xs = hs;
        }
        let last = xs.pop().expect("at least one step");
        let (out, head) = self
            .params
            .head
            .forward_train(last.view(), dropout.map(|r| (p, r)));
        Ok((
            out,
            ForwardCache {
                lstm: caches,
                masks,
                head,
                steps,
            },
        ))
    }

    /// Predictions for a batch of windows (inference mode).
    pub fn predict_batch(&self, windows: &[ArrayView2<'_, f64>]) -> Result<Array2<f64>, ForecastError> {
        Ok(self.forward_internal(windows, None)?.0)
    }

    /// One window to a `horizon` vector. With `training`, inverted dropout is
    /// applied using a stream seeded by `seed`.
    pub fn forward(
        &self,
        window: ArrayView2<'_, f64>,
        training: bool,
        seed: u64,
    ) -> Result<Array1<f64>, ForecastError> {
        self.check_window(&window)?;
        let mut rng = rng::seeded(seed);
        let out = self.forward_internal(&[window], training.then_some(&mut rng))?.0;
        Ok(out.row(0).to_owned())
    }

    /// Mean squared error over every batch element and horizon step, and its
    /// gradient by full backpropagation through time.
    pub fn loss_and_gradients(
        &self,
        windows: &[ArrayView2<'_, f64>],
        targets: &[ArrayView1<'_, f64>],
        dropout: Option<&mut Rng>,
    ) -> Result<(f64, ForecastParams), ForecastError> {
        if windows.is_empty() {
            return Err(ForecastError::EmptyBatch);
        }
        if windows.len() != targets.len() {
            return Err(ForecastError::InvalidShape {
                expected: format!("{} targets", windows.len()),
                actual: format!("{} targets", targets.len()),
            });
        }
        let h = self.horizon();
        let mut y = Array2::zeros((targets.len(), h));
        for (b, t) in targets.iter().enumerate() {
            if t.len() != h {
                return Err(ForecastError::InvalidShape {
                    expected: format!("target of length {h}"),
                    actual: format!("length {}", t.len()),
                });
            }
            y.row_mut(b).assign(t);
        }
        let (pred, cache) = self.forward_internal(windows, dropout)?;
        let diff = &pred - &y;
        let n = diff.len() as f64;
        let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;

        let mut grad = self.params.zeros_like();
        let dout = diff * (2.0 / n);
        let mut d_last = self.params.head.backward(&cache.head, dout, &mut grad.head);

        let layers = self.params.lstm.len();
        let mut dhs: Vec<Option<Array2<f64>>> = vec![None; cache.steps];
        for l in (0..layers).rev() {
            if l == layers - 1 {
                if let Some(masks) = &cache.masks[l] {
                    d_last *= &masks[cache.steps - 1];
                }
                dhs[cache.steps - 1] = Some(d_last.clone());
            }
            let dxs = self.params.lstm[l].backward(&cache.lstm[l], &dhs, &mut grad.lstm[l]);
            if l > 0 {
                let below = &cache.masks[l - 1];
                dhs = dxs
                    .into_iter()
                    .enumerate()
                    .map(|(t, mut dx)| {
                        if let Some(m) = below {
                            dx *= &m[t];
                        }
                        Some(dx)
                    })
                    .collect();
            }
        }
        Ok((loss, grad))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub initial_lr: f64,
    pub lr_min: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub gradient_clip: f64,
    pub momentum: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            initial_lr: 0.001,
            lr_min: 0.0,
            batch_size: 32,
            seed: 0,
            gradient_clip: 5.0,
            momentum: 0.9,
        }
    }
}

/// Cosine annealing: `lr_min + ½(lr_0 − lr_min)(1 + cos(π·e/E))`.
pub fn cosine_lr(epoch: usize, epochs: usize, lr0: f64, lr_min: f64) -> f64 {
    if epochs == 0 {
        return lr0;
    }
    let frac = epoch as f64 / epochs as f64;
    lr_min + 0.5 * (lr0 - lr_min) * (1.0 + (std::f64::consts::PI * frac).cos())
}

/// Mini-batch training with seeded per-epoch shuffling. Returns the trained
/// model and the mean loss of every epoch.
pub fn train(
    model: &ForecastModel,
    dataset: &WindowedDataset,
    config: &TrainConfig,
) -> Result<(ForecastModel, Vec<f64>), ForecastError> {
    if dataset.is_empty() {
        return Err(ForecastError::EmptyBatch);
    }
    if config.initial_lr <= 0.0 || config.batch_size == 0 {
        return Err(ForecastError::InvalidConfig(
            "initial_lr must be > 0 and batch_size ≥ 1".into(),
        ));
    }
    if dataset.horizon() != model.horizon() {
        return Err(ForecastError::InvalidShape {
            expected: format!("horizon {}", model.horizon()),
            actual: format!("horizon {}", dataset.horizon()),
        });
    }
    let mut model = model.clone();
    let mut rng = rng::seeded(config.seed);
    let mut opt = Momentum::new(config.momentum, config.gradient_clip);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut curve = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let lr = cosine_lr(epoch, config.epochs, config.initial_lr, config.lr_min);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let xs: Vec<_> = batch.iter().map(|&i| dataset.input(i)).collect();
            let ys: Vec<_> = batch.iter().map(|&i| dataset.target(i)).collect();
            let (loss, grad) = model.loss_and_gradients(&xs, &ys, Some(&mut rng))?;
            if !loss.is_finite() {
                return Err(ForecastError::Diverged { epoch, lr });
            }
            total += loss * batch.len() as f64;
            opt.step(&mut model.params, &grad, lr);
        }
        let mean = total / dataset.len() as f64;
        if !mean.is_finite() || !model.params.all_finite() {
            return Err(ForecastError::Diverged { epoch, lr });
        }
        curve.push(mean);
    }
    Ok((model, curve))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastMetrics {
    pub rmse: f64,
    /// Percent.
    pub mape: f64,
    pub n_evaluated: usize,
    pub n_excluded_zero_targets: usize,
}

const MAPE_ZERO: f64 = 1e-9;

/// RMSE over all points; MAPE over points whose target magnitude exceeds
/// 1e-9, as a percentage.
pub fn forecast_metrics(preds: &[f64], targets: &[f64]) -> Result<ForecastMetrics, ForecastError> {
    if preds.is_empty() || preds.len() != targets.len() {
        return Err(ForecastError::InvalidShape {
            expected: format!("{} predictions (non-empty)", targets.len()),
            actual: format!("{}", preds.len()),
        });
    }
    let n = preds.len();
    let rmse = (preds
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    let (sum, used) = preds
        .iter()
        .zip(targets)
        .filter(|(_, t)| t.abs() > MAPE_ZERO)
        .fold((0.0, 0usize), |(s, c), (p, t)| {
            (s + (p - t).abs() / t.abs(), c + 1)
        });
    if used == 0 {
        return Err(ForecastError::MapeUndefined { rmse });
    }
    Ok(ForecastMetrics {
        rmse,
        mape: 100.0 * sum / used as f64,
        n_evaluated: used,
        n_excluded_zero_targets: n - used,
    })
}

fn unscale(scaler: Option<ColumnScale>, v: f64) -> f64 {
    scaler.map_or(v, |s| s.invert(v))
}

/// Forecast accuracy on a test set, in the target's original units when the
/// model carries a scaler.
pub fn evaluate(model: &ForecastModel, test: &WindowedDataset) -> Result<ForecastMetrics, ForecastError> {
    if test.is_empty() {
        return Err(ForecastError::EmptyBatch);
    }
    let mut preds = Vec::with_capacity(test.len() * model.horizon());
    let mut targets = Vec::with_capacity(preds.capacity());
    let idx: Vec<usize> = (0..test.len()).collect();
    for chunk in idx.chunks(256) {
        let xs: Vec<_> = chunk.iter().map(|&i| test.input(i)).collect();
        let out = model.predict_batch(&xs)?;
        for (row, &i) in out.rows().into_iter().zip(chunk) {
            preds.extend(row.iter().map(|&v| unscale(model.scaler, v)));
            targets.extend(test.target(i).iter().map(|&v| unscale(model.scaler, v)));
        }
    }
    forecast_metrics(&preds, &targets)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineKind {
    Persistence,
    MovingAverage(usize),
}

/// Naive forecasts from the target history: repeat the last value, or the
/// mean of the last `k` values.
pub fn baseline_predict(
    kind: BaselineKind,
    history: &[f64],
    horizon: usize,
) -> Result<Vec<f64>, ForecastError> {
    let last = *history.last().ok_or(ForecastError::EmptyBatch)?;
    let v = match kind {
        BaselineKind::Persistence => last,
        BaselineKind::MovingAverage(0) => {
            return Err(ForecastError::InvalidConfig("moving average needs k ≥ 1".into()))
        }
        BaselineKind::MovingAverage(k) if k > history.len() => {
            return Err(ForecastError::InvalidConfig(format!(
                "moving average k = {k} exceeds history length {}",
                history.len()
            )))
        }
        BaselineKind::MovingAverage(k) => history[history.len() - k..].iter().sum::<f64>() / k as f64,
    };
    Ok(vec![v; horizon])
}

/// Baseline accuracy on the same windows (and units) as [`evaluate`].
pub fn evaluate_baseline(
    kind: BaselineKind,
    test: &WindowedDataset,
    scaler: Option<ColumnScale>,
) -> Result<ForecastMetrics, ForecastError> {
    if test.is_empty() {
        return Err(ForecastError::EmptyBatch);
    }
    let mut preds = Vec::new();
    let mut targets = Vec::new();
    for i in 0..test.len() {
        let history: Vec<f64> = test.input(i).slice(s![.., test.target_col()]).to_vec();
        let p = baseline_predict(kind, &history, test.horizon())?;
        preds.extend(p.into_iter().map(|v| unscale(scaler, v)));
        targets.extend(test.target(i).iter().map(|&v| unscale(scaler, v)));
    }
    forecast_metrics(&preds, &targets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{make_windows, TraceFrame};
    use ndarray::Array2;

    fn toy(lstm: Vec<usize>, input: usize, horizon: usize, dropout: f64) -> ForecastModel {
        ForecastModel::init(
            ModelShape {
                input_size: input,
                lstm_sizes: lstm,
                dense_sizes: vec![3],
                horizon,
                dropout_rate: dropout,
            },
            11,
        )
        .unwrap()
    }

    #[test]
    fn default_shapes_chain() {
        let m = init_model(&[128, 256, 128], 12, 0).unwrap();
        assert_eq!(m.dims(), vec![14, 128, 256, 128, 64, 32, 12]);
        assert_eq!(m, init_model(&[128, 256, 128], 12, 0).unwrap());
        assert!(m
            .params
            .lstm
            .iter()
            .all(|l| l.forget_bias().iter().all(|&b| b == 1.0)));
        assert!(matches!(
            init_model(&[4, 0], 2, 0),
            Err(ForecastError::ZeroSizeLayer)
        ));
        assert!(init_model(&[], 2, 0).is_err());
    }

    #[test]
    fn zero_weights_output_final_bias() {
        let mut m = toy(vec![3], 2, 2, 0.0);
        for p in m.params.params_mut() {
            p.fill(0.0);
        }
        let last = m.params.head.layers.len() - 1;
        m.params.head.layers[last].b = Array1::from_vec(vec![0.25, -0.5]);
        let w = Array2::from_elem((5, 2), 0.9);
        assert_eq!(m.forward(w.view(), false, 0).unwrap().to_vec(), vec![0.25, -0.5]);
    }

    #[test]
    fn inference_is_pure_and_shape_checked() {
        let m = toy(vec![3, 2], 4, 3, 0.3);
        let w = Array2::from_shape_fn((6, 4), |(i, j)| (i as f64 * 0.3 + j as f64).sin());
        let a = m.forward(w.view(), false, 1).unwrap();
        assert_eq!(a, m.forward(w.view(), false, 2).unwrap());
        assert_eq!(a.len(), 3);
        assert_ne!(a, m.forward(w.view(), true, 2).unwrap());
        let bad = Array2::zeros((6, 5));
        assert!(matches!(
            m.forward(bad.view(), false, 0),
            Err(ForecastError::InvalidShape { .. })
        ));
    }

    #[test]
    fn loss_is_quadratic_in_residual() {
        let m = toy(vec![2], 3, 2, 0.0);
        let w = Array2::from_shape_fn((4, 3), |(i, j)| 0.1 * (i + j) as f64);
        let p = m.forward(w.view(), false, 0).unwrap();
        let (l0, g) = m.loss_and_gradients(&[w.view()], &[p.view()], None).unwrap();
        assert_eq!(l0, 0.0);
        assert!(g.head.layers.last().unwrap().b.iter().all(|&v| v == 0.0));
        let t1 = &p + 0.3;
        let t2 = &p + 0.6;
        let (l1, _) = m.loss_and_gradients(&[w.view()], &[t1.view()], None).unwrap();
        let (l2, _) = m.loss_and_gradients(&[w.view()], &[t2.view()], None).unwrap();
        assert!((l2 / l1 - 4.0).abs() < 1e-9);
    }

    /// Central finite differences against backprop on every parameter.
    fn gradient_check(m: &ForecastModel, steps: usize, batch: usize) -> (usize, f64) {
        let n_in = m.shape.input_size;
        let windows: Vec<Array2<f64>> = (0..batch)
            .map(|b| Array2::from_shape_fn((steps, n_in), |(t, j)| ((t * 7 + j * 3 + b * 5) as f64).sin()))
            .collect();
        let targets: Vec<Array1<f64>> = (0..batch)
            .map(|b| Array1::from_shape_fn(m.horizon(), |k| ((k + b) as f64 * 0.7).cos()))
            .collect();
        let xs: Vec<_> = windows.iter().map(|w| w.view()).collect();
        let ys: Vec<_> = targets.iter().map(|t| t.view()).collect();
        let (_, grad) = m.loss_and_gradients(&xs, &ys, None).unwrap();
        let analytic: Vec<f64> = grad.params().iter().flat_map(|p| p.values.to_vec()).collect();
        let eps = 1e-5;
        let mut probe = m.clone();
        let mut bad = 0;
        let mut worst = 0.0f64;
        let mut idx = 0;
        let n_tensors = probe.params.params_mut().len();
        for t in 0..n_tensors {
            let len = probe.params.params_mut()[t].len();
            for k in 0..len {
                let orig = probe.params.params_mut()[t][k];
                probe.params.params_mut()[t][k] = orig + eps;
                let lp = probe.loss_and_gradients(&xs, &ys, None).unwrap().0;
                probe.params.params_mut()[t][k] = orig - eps;
                let lm = probe.loss_and_gradients(&xs, &ys, None).unwrap().0;
                probe.params.params_mut()[t][k] = orig;
                let numeric = (lp - lm) / (2.0 * eps);
                let a = analytic[idx];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max(rel);
                if rel > 1e-4 {
                    bad += 1;
                }
                idx += 1;
            }
        }
        assert_eq!(idx, analytic.len());
        (bad, worst)
    }

    #[test]
    fn gradients_match_finite_differences_single_unit() {
        let m = toy(vec![1], 1, 1, 0.0);
        let (bad, worst) = gradient_check(&m, 2, 1);
        assert_eq!(bad, 0, "worst relative error {worst}");
    }

    #[test]
    fn gradients_match_finite_differences_two_layers() {
        let m = toy(vec![4, 4], 3, 2, 0.0);
        let (bad, worst) = gradient_check(&m, 3, 2);
        assert_eq!(bad, 0, "worst relative error {worst}");
    }

    #[test]
    fn cosine_schedule_endpoints_and_monotone() {
        assert!((cosine_lr(0, 10, 0.01, 0.001) - 0.01).abs() < 1e-15);
        assert!((cosine_lr(10, 10, 0.01, 0.001) - 0.001).abs() < 1e-15);
        let lrs: Vec<f64> = (0..=10).map(|e| cosine_lr(e, 10, 0.01, 0.0)).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
    }

    fn sine_frame(n: usize) -> TraceFrame {
        let data = Array2::from_shape_fn((n, N_FEATURES), |(k, j)| {
            0.5 + 0.4 * (k as f64 * 0.3 + j as f64 * 0.1).sin()
        });
        TraceFrame::canonical(0, 300, data).unwrap()
    }

    #[test]
    fn training_reduces_loss_on_sine() {
        let ds = make_windows(&sine_frame(120), 8, 2, "cpu_util").unwrap();
        let m = ForecastModel::init(
            ModelShape {
                lstm_sizes: vec![8],
                dense_sizes: vec![8],
                horizon: 2,
                dropout_rate: 0.0,
                ..ModelShape::default()
            },
            3,
        )
        .unwrap();
        let cfg = TrainConfig {
            epochs: 200,
            initial_lr: 0.05,
            batch_size: 16,
            seed: 9,
            ..TrainConfig::default()
        };
        let (trained, curve) = train(&m, &ds, &cfg).unwrap();
        assert_eq!(curve.len(), 200);
        assert!(curve[199] < 0.1 * curve[0], "{} vs {}", curve[199], curve[0]);
        let (_, again) = train(&m, &ds, &cfg).unwrap();
        assert_eq!(curve, again);
        assert!(trained.params.all_finite());
    }

    #[test]
    fn zero_epochs_returns_model_unchanged() {
        let ds = make_windows(&sine_frame(30), 8, 2, "cpu_util").unwrap();
        let m = toy(vec![2], N_FEATURES, 2, 0.3);
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let (out, curve) = train(&m, &ds, &cfg).unwrap();
        assert_eq!(out, m);
        assert!(curve.is_empty());
    }

    #[test]
    fn diverging_training_reports_error() {
        let ds = make_windows(&sine_frame(60), 8, 2, "cpu_util").unwrap();
        let m = toy(vec![4], N_FEATURES, 2, 0.0);
        let cfg = TrainConfig {
            epochs: 50,
            initial_lr: 1e6,
            gradient_clip: 0.0,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&m, &ds, &cfg),
            Err(ForecastError::Diverged { .. })
        ));
    }

    #[test]
    fn metric_examples() {
        let m = forecast_metrics(&[1.0, 2.0], &[2.0, 4.0]).unwrap();
        assert!((m.rmse - 2.5f64.sqrt()).abs() < 1e-12);
        assert!((m.mape - 50.0).abs() < 1e-12);
        let perfect = forecast_metrics(&[0.3, 0.4], &[0.3, 0.4]).unwrap();
        assert_eq!((perfect.rmse, perfect.mape), (0.0, 0.0));
        let z = forecast_metrics(&[1.0, 1.0], &[0.0, 2.0]).unwrap();
        assert_eq!((z.n_evaluated, z.n_excluded_zero_targets), (1, 1));
        assert!(matches!(
            forecast_metrics(&[1.0], &[0.0]),
            Err(ForecastError::MapeUndefined { rmse }) if rmse == 1.0
        ));
    }

    #[test]
    fn baselines() {
        assert_eq!(
            baseline_predict(BaselineKind::Persistence, &[0.1, 0.6], 3).unwrap(),
            vec![0.6; 3]
        );
        let ma = baseline_predict(BaselineKind::MovingAverage(3), &[5.0, 0.3, 0.6, 0.9], 2).unwrap();
        assert!(ma.iter().all(|v| (v - 0.6).abs() < 1e-15));
        assert!(baseline_predict(BaselineKind::MovingAverage(0), &[1.0], 2).is_err());
        assert!(baseline_predict(BaselineKind::MovingAverage(3), &[1.0], 2).is_err());
    }
}
