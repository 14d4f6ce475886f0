//! Cleaning, resampling and scaling.
//!
//! The pipeline per column is: drop 3σ outliers, bucket onto a uniform grid
//! (mean per bucket), fill empty buckets with a running EMA, then min-max
//! scale every column of the assembled frame into `[0, 1]`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{feature_index, MetricSeries, TraceError, TraceFrame, FEATURES, N_FEATURES};

pub const DEFAULT_ALPHA: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct CleanedSeries {
    pub series: MetricSeries,
    /// Positions (in the input) of the dropped samples.
    pub removed: Vec<usize>,
}

impl CleanedSeries {
    pub fn removed_count(&self) -> usize {
        self.removed.len()
    }
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Drops samples further than three population standard deviations from the
/// mean. Mean and σ are computed once over the whole input.
pub fn clean_outliers_3sigma(series: &MetricSeries) -> CleanedSeries {
    if series.is_empty() {
        return CleanedSeries {
            series: series.clone(),
            removed: Vec::new(),
        };
    }
    let (mean, sd) = mean_and_std(&series.values);
    let limit = 3.0 * sd;
    let mut out = MetricSeries {
        name: series.name.clone(),
        timestamps: Vec::with_capacity(series.len()),
        values: Vec::with_capacity(series.len()),
    };
    let mut removed = Vec::new();
    for (i, (&t, &v)) in series.timestamps.iter().zip(&series.values).enumerate() {
        if sd > 0.0 && (v - mean).abs() > limit {
            removed.push(i);
        } else {
            out.timestamps.push(t);
            out.values.push(v);
        }
    }
    CleanedSeries { series: out, removed }
}

/// Uniform time grid: `len` buckets of `interval` seconds from `start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub start: i64,
    pub interval: u64,
    pub len: usize,
}

impl Grid {
    /// Smallest grid anchored at the earliest timestamp that covers every
    /// sample of every series.
    pub fn covering<'a>(
        series: impl IntoIterator<Item = &'a MetricSeries>,
        interval: u64,
    ) -> Result<Grid, TraceError> {
        if interval == 0 {
            return Err(TraceError::InvalidArgument("interval must be > 0".into()));
        }
        let mut lo = i64::MAX;
        let mut hi = i64::MIN;
        for s in series {
            if let (Some(&a), Some(&b)) = (s.timestamps.first(), s.timestamps.last()) {
                lo = lo.min(a);
                hi = hi.max(b);
            }
        }
        if lo > hi {
            return Err(TraceError::Empty);
        }
        let len = ((hi - lo) as u64 / interval) as usize + 1;
        Ok(Grid {
            start: lo,
            interval,
            len,
        })
    }

    pub fn timestamp(&self, k: usize) -> i64 {
        self.start + (k as u64 * self.interval) as i64
    }

    fn bucket(&self, t: i64) -> Option<usize> {
        if t < self.start {
            return None;
        }
        let k = ((t - self.start) as u64 / self.interval) as usize;
        (k < self.len).then_some(k)
    }
}

fn check_alpha(alpha: f64) -> Result<(), TraceError> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(TraceError::InvalidArgument(format!(
            "alpha {alpha} outside (0, 1]"
        )))
    }
}

/// Resamples onto `grid` and returns the series plus the number of buckets
/// that had to be imputed.
fn resample_counting(
    series: &MetricSeries,
    grid: &Grid,
    alpha: f64,
) -> Result<(MetricSeries, usize), TraceError> {
    check_alpha(alpha)?;
    if series.is_empty() {
        return Err(TraceError::Empty);
    }
    let mut sums = vec![0.0; grid.len];
    let mut counts = vec![0usize; grid.len];
    for (&t, &v) in series.timestamps.iter().zip(&series.values) {
        if let Some(k) = grid.bucket(t) {
            sums[k] += v;
            counts[k] += 1;
        }
    }
    let first = match counts.iter().position(|&c| c > 0) {
        Some(k) => sums[k] / counts[k] as f64,
        None => return Err(TraceError::Empty),
    };

    let mut values = Vec::with_capacity(grid.len);
    let mut imputed = 0;
    let mut ema = first;
    let mut seen = false;
    for k in 0..grid.len {
        if counts[k] > 0 {
            let v = sums[k] / counts[k] as f64;
            ema = if seen { alpha * v + (1.0 - alpha) * ema } else { v };
            seen = true;
            values.push(v);
        } else {
            imputed += 1;
            values.push(ema);
        }
    }
    Ok((
        MetricSeries {
            name: series.name.clone(),
            timestamps: (0..grid.len).map(|k| grid.timestamp(k)).collect(),
            values,
        },
        imputed,
    ))
}

/// Resamples `series` onto an explicit grid. Buckets average their samples;
/// empty buckets take the running EMA of the preceding output values, and a
/// leading gap takes the first observed value.
pub fn resample_onto(series: &MetricSeries, grid: &Grid, alpha: f64) -> Result<MetricSeries, TraceError> {
    resample_counting(series, grid, alpha).map(|(s, _)| s)
}

/// Resamples onto the grid spanning the series' own first and last sample.
pub fn resample_and_impute(
    series: &MetricSeries,
    interval: u64,
    alpha: f64,
) -> Result<MetricSeries, TraceError> {
    check_alpha(alpha)?;
    let grid = Grid::covering([series], interval)?;
    resample_onto(series, &grid, alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub min: f64,
    pub max: f64,
}

impl ColumnScale {
    pub fn fit(values: impl IntoIterator<Item = f64>) -> Self {
        let (min, max) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        Self { min, max }
    }

    pub fn apply(&self, v: f64) -> f64 {
        let range = self.max - self.min;
        if range > 0.0 {
            (v - self.min) / range
        } else {
            0.0
        }
    }

    pub fn invert(&self, v: f64) -> f64 {
        v * (self.max - self.min) + self.min
    }
}

/// Per-column min/max, keyed by column name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub names: Vec<String>,
    pub scales: Vec<ColumnScale>,
}

impl ScalerParams {
    pub fn get(&self, name: &str) -> Option<ColumnScale> {
        self.names.iter().position(|n| n == name).map(|i| self.scales[i])
    }

    fn map_frame(
        &self,
        frame: &TraceFrame,
        f: impl Fn(&ColumnScale, f64) -> f64,
    ) -> Result<TraceFrame, TraceError> {
        let mut data = frame.data().clone();
        for (j, name) in frame.names().iter().enumerate() {
            let scale = self
                .get(name)
                .ok_or_else(|| TraceError::UnknownColumn(name.clone()))?;
            data.column_mut(j).mapv_inplace(|v| f(&scale, v));
        }
        TraceFrame::new(
            frame.start_time(),
            frame.tick_interval(),
            frame.names().to_vec(),
            data,
        )
    }

    pub fn transform(&self, frame: &TraceFrame) -> Result<TraceFrame, TraceError> {
        self.map_frame(frame, |s, v| s.apply(v))
    }
}

/// Scales every column into `[0, 1]`. Constant columns map to 0.
pub fn minmax_fit_transform(frame: &TraceFrame) -> (TraceFrame, ScalerParams) {
    let scales = frame
        .data()
        .columns()
        .into_iter()
        .map(|c| ColumnScale::fit(c.iter().copied()))
        .collect();
    let params = ScalerParams {
        names: frame.names().to_vec(),
        scales,
    };
    let scaled = params.transform(frame).expect("params were fitted on this frame");
    (scaled, params)
}

pub fn inverse_transform(frame: &TraceFrame, params: &ScalerParams) -> Result<TraceFrame, TraceError> {
    params.map_frame(frame, |s, v| s.invert(v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepConfig {
    pub interval: u64,
    pub alpha: f64,
    pub clean_outliers: bool,
}

impl Default for PrepConfig {
    fn default() -> Self {
        Self {
            interval: super::DEFAULT_TICK_SECONDS,
            alpha: DEFAULT_ALPHA,
            clean_outliers: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepReport {
    pub grid_len: usize,
    pub removed: Vec<usize>,
    pub imputed: Vec<usize>,
}

impl PrepReport {
    pub fn total_removed(&self) -> usize {
        self.removed.iter().sum()
    }

    pub fn total_imputed(&self) -> usize {
        self.imputed.iter().sum()
    }
}

/// Output of [`preprocess_columns`].
#[derive(Debug, Clone)]
pub struct Prepared {
    /// Cleaned and resampled, original units.
    pub resampled: TraceFrame,
    /// `resampled` scaled into `[0, 1]`.
    pub normalized: TraceFrame,
    pub scaler: ScalerParams,
    pub report: PrepReport,
}

/// Full clean → resample → normalize pass over 14 named columns that may
/// have ragged timestamps. The output frame uses canonical column order.
pub fn preprocess_columns(columns: &[MetricSeries], cfg: &PrepConfig) -> Result<Prepared, TraceError> {
    check_alpha(cfg.alpha)?;
    if columns.len() != N_FEATURES {
        return Err(TraceError::InvalidArgument(format!(
            "expected {N_FEATURES} columns, got {}",
            columns.len()
        )));
    }
    let mut ordered: Vec<Option<&MetricSeries>> = vec![None; N_FEATURES];
    for c in columns {
        let j = feature_index(&c.name).ok_or_else(|| TraceError::UnknownColumn(c.name.clone()))?;
        if ordered[j].replace(c).is_some() {
            return Err(TraceError::InvalidArgument(format!(
                "duplicate column {:?}",
                c.name
            )));
        }
    }
    let ordered: Vec<&MetricSeries> = ordered.into_iter().map(|c| c.expect("all 14 present")).collect();

    let cleaned: Vec<CleanedSeries> = ordered
        .iter()
        .map(|s| {
            if cfg.clean_outliers {
                clean_outliers_3sigma(s)
            } else {
                CleanedSeries {
                    series: (*s).clone(),
                    removed: Vec::new(),
                }
            }
        })
        .collect();
    // Grid from the uncleaned inputs so dropping an edge sample never
    // shrinks the frame.
    let grid = Grid::covering(ordered.iter().copied(), cfg.interval)?;

    let mut data = Array2::zeros((grid.len, N_FEATURES));
    let mut imputed = Vec::with_capacity(N_FEATURES);
    for (j, c) in cleaned.iter().enumerate() {
        let (s, gaps) = resample_counting(&c.series, &grid, cfg.alpha).map_err(|e| match e {
            TraceError::Empty => {
                TraceError::InvalidArgument(format!("column {} has no samples", FEATURES[j]))
            }
            e => e,
        })?;
        imputed.push(gaps);
        for (k, v) in s.values.into_iter().enumerate() {
            data[[k, j]] = v;
        }
    }
    let resampled = TraceFrame::canonical(grid.start, grid.interval, data)?;
    let (normalized, scaler) = minmax_fit_transform(&resampled);
    Ok(Prepared {
        resampled,
        normalized,
        scaler,
        report: PrepReport {
            grid_len: grid.len,
            removed: cleaned.iter().map(|c| c.removed_count()).collect(),
            imputed,
        },
    })
}
