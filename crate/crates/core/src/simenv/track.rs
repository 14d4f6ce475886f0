use ndarray::s;
use serde::{Deserialize, Serialize};

use super::{offered_load, ClusterConfig, SimError};
use crate::forecast::ForecastModel;
use crate::trace::TraceFrame;

/// Demand forecasts available to a policy: row `t` predicts the demand (in
/// cores) of ticks `t .. t + horizon` using only data before `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastTrack {
    pub source: String,
    pub horizon: usize,
    pub rows: Vec<Vec<f64>>,
}

fn demands(frame: &TraceFrame, cluster: &ClusterConfig) -> Result<Vec<f64>, SimError> {
    (0..frame.len())
        .map(|t| offered_load(frame, t, cluster).map(|d| d.cpu))
        .collect()
}

impl ForecastTrack {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, tick: usize) -> &[f64] {
        &self.rows[tick]
    }

    /// Perfect foresight; beyond the trace end the last demand repeats.
    pub fn oracle(frame: &TraceFrame, cluster: &ClusterConfig, horizon: usize) -> Result<Self, SimError> {
        let d = demands(frame, cluster)?;
        let rows = (0..d.len())
            .map(|t| (0..horizon).map(|k| d[(t + k).min(d.len() - 1)]).collect())
            .collect();
        Ok(Self {
            source: "oracle".into(),
            horizon,
            rows,
        })
    }

    /// Last observed demand repeated (tick 0 sees its own demand).
    pub fn persistence(
        frame: &TraceFrame,
        cluster: &ClusterConfig,
        horizon: usize,
    ) -> Result<Self, SimError> {
        let d = demands(frame, cluster)?;
        let rows = (0..d.len())
            .map(|t| vec![d[t.saturating_sub(1)]; horizon])
            .collect();
        Ok(Self {
            source: "persistence".into(),
            horizon,
            rows,
        })
    }

    /// Forecasts from a trained model. `normalized` is `raw` after the scaling
    /// the model was trained with. Until a full window of history exists the
    /// track falls back to persistence. Predictions of the model's target are
    /// converted to demand by the ratio of demand to target over the window.
    pub fn from_model(
        model: &ForecastModel,
        normalized: &TraceFrame,
        raw: &TraceFrame,
        cluster: &ClusterConfig,
        window_len: usize,
    ) -> Result<Self, SimError> {
        if normalized.len() != raw.len() {
            return Err(SimError::TrackLength {
                track: normalized.len(),
                trace: raw.len(),
            });
        }
        let d = demands(raw, cluster)?;
        let target = raw.column_values(&model.target_metric)?;
        let data = normalized.data();
        let h = model.horizon();
        let mut rows: Vec<Vec<f64>> = (0..d.len()).map(|t| vec![d[t.saturating_sub(1)]; h]).collect();
        let ticks: Vec<usize> = (window_len.max(1)..d.len()).collect();
        for chunk in ticks.chunks(256) {
            let windows: Vec<_> = chunk
                .iter()
                .map(|&t| data.slice(s![t - window_len..t, ..]))
                .collect();
            let preds = model.predict_batch(&windows)?;
            for (&t, p) in chunk.iter().zip(preds.rows()) {
                let ratio = if model.target_metric == "request_rate" {
                    cluster.work_per_request
                } else {
                    let dsum: f64 = d[t - window_len..t].iter().sum();
                    let tsum: f64 = target.slice(s![t - window_len..t]).sum();
                    if tsum.abs() > 1e-12 {
                        dsum / tsum
                    } else {
                        0.0
                    }
                };
                rows[t] = p
                    .iter()
                    .map(|&v| {
                        let v = model.scaler.map_or(v, |sc| sc.invert(v));
                        (v * ratio).max(0.0)
                    })
                    .collect();
            }
        }
        Ok(Self {
            source: "model".into(),
            horizon: h,
            rows,
        })
    }
}
