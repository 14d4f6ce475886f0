//! Workload traces: synthetic generation, CSV ingest and the cleaning /
//! resampling / scaling pipeline that turns raw telemetry into model-ready
//! windows.

mod csv_io;
mod generate;
mod preprocess;
mod window;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csv_io::{
    ingest_csv, ingest_csv_raw, read_csv, read_csv_raw, write_csv, write_csv_to, RawTrace, TRACE_HEADER,
};
pub use generate::{generate_workload, WorkloadSpec};
pub use preprocess::{
    clean_outliers_3sigma, inverse_transform, minmax_fit_transform, preprocess_columns, resample_and_impute,
    resample_onto, CleanedSeries, ColumnScale, Grid, PrepConfig, PrepReport, Prepared, ScalerParams,
};
pub use window::{make_windows, split_train_test, WindowedDataset};

/// Default tick: five minutes.
pub const DEFAULT_TICK_SECONDS: u64 = 300;

/// The fixed feature set, in canonical column order.
pub const FEATURES: [&str; 14] = [
    "cpu_util",
    "mem_util",
    "storage_util",
    "disk_read_iops",
    "disk_write_iops",
    "net_in",
    "net_out",
    "request_rate",
    "active_connections",
    "error_rate",
    "queue_depth",
    "p99_latency",
    "hour_sin",
    "hour_cos",
];

pub const N_FEATURES: usize = FEATURES.len();

pub fn feature_index(name: &str) -> Option<usize> {
    FEATURES.iter().position(|f| *f == name)
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace is empty")]
    Empty,
    #[error("invalid workload spec: {0}")]
    InvalidSpec(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: expected {expected} columns, found {found}")]
    ColumnCount {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: timestamp {timestamp} does not increase (previous {previous})")]
    NonMonotonic {
        line: u64,
        timestamp: i64,
        previous: i64,
    },
    #[error("line {line}: tick spacing {spacing}s differs from {expected}s")]
    Irregular { line: u64, spacing: i64, expected: i64 },
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("frame has {actual} ticks but at least {required} are required")]
    TooShort { required: usize, actual: usize },
    #[error("split leaves the {side} set empty ({count} windows, ratio {ratio})")]
    EmptySplit {
        side: &'static str,
        count: usize,
        ratio: f64,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// One metric over time. Timestamps are strictly increasing epoch seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub name: String,
    pub timestamps: Vec<i64>,
    pub values: Vec<f64>,
}

impl MetricSeries {
    pub fn new(name: impl Into<String>, timestamps: Vec<i64>, values: Vec<f64>) -> Result<Self, TraceError> {
        if timestamps.len() != values.len() {
            return Err(TraceError::InvalidArgument(format!(
                "{} timestamps but {} values",
                timestamps.len(),
                values.len()
            )));
        }
        if let Some(w) = timestamps.windows(2).find(|w| w[1] <= w[0]) {
            return Err(TraceError::InvalidArgument(format!(
                "timestamps not strictly increasing at {}",
                w[1]
            )));
        }
        Ok(Self {
            name: name.into(),
            timestamps,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Time-aligned 14-column table on a uniform grid.
///
/// Stored row-major (`ticks × 14`); `names[j]` labels column `j`. Row `k`
/// sits at `start_time + k * tick_interval`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFrame {
    tick_interval: u64,
    start_time: i64,
    names: Vec<String>,
    data: Array2<f64>,
}

impl TraceFrame {
    pub fn new(
        start_time: i64,
        tick_interval: u64,
        names: Vec<String>,
        data: Array2<f64>,
    ) -> Result<Self, TraceError> {
        if tick_interval == 0 {
            return Err(TraceError::InvalidArgument("tick_interval must be > 0".into()));
        }
        if names.len() != N_FEATURES || data.ncols() != N_FEATURES {
            return Err(TraceError::InvalidArgument(format!(
                "frame needs exactly {N_FEATURES} columns, got {} names / {} data columns",
                names.len(),
                data.ncols()
            )));
        }
        for (j, n) in names.iter().enumerate() {
            if feature_index(n).is_none() {
                return Err(TraceError::UnknownColumn(n.clone()));
            }
            if names[..j].contains(n) {
                return Err(TraceError::InvalidArgument(format!("duplicate column {n:?}")));
            }
        }
        Ok(Self {
            tick_interval,
            start_time,
            names,
            data,
        })
    }

    /// Frame in canonical column order.
    pub fn canonical(start_time: i64, tick_interval: u64, data: Array2<f64>) -> Result<Self, TraceError> {
        Self::new(
            start_time,
            tick_interval,
            FEATURES.iter().map(|s| s.to_string()).collect(),
            data,
        )
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn tick_interval(&self) -> u64 {
        self.tick_interval
    }

    pub fn start_time(&self) -> i64 {
        self.start_time
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn timestamp(&self, tick: usize) -> i64 {
        self.start_time + (tick as i64) * self.tick_interval as i64
    }

    pub fn timestamps(&self) -> Vec<i64> {
        (0..self.len()).map(|k| self.timestamp(k)).collect()
    }

    pub fn column_index(&self, name: &str) -> Result<usize, TraceError> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| TraceError::UnknownColumn(name.to_string()))
    }

    pub fn column_values(&self, name: &str) -> Result<ArrayView1<'_, f64>, TraceError> {
        Ok(self.data.column(self.column_index(name)?))
    }

    pub fn column(&self, name: &str) -> Result<MetricSeries, TraceError> {
        let values = self.column_values(name)?.to_vec();
        Ok(MetricSeries {
            name: name.to_string(),
            timestamps: self.timestamps(),
            values,
        })
    }

    pub fn columns(&self) -> Vec<MetricSeries> {
        let ts = self.timestamps();
        self.names
            .iter()
            .enumerate()
            .map(|(j, n)| MetricSeries {
                name: n.clone(),
                timestamps: ts.clone(),
                values: self.data.column(j).to_vec(),
            })
            .collect()
    }

    pub fn value(&self, tick: usize, name: &str) -> Result<f64, TraceError> {
        let j = self.column_index(name)?;
        self.data.get((tick, j)).copied().ok_or(TraceError::TooShort {
            required: tick + 1,
            actual: self.len(),
        })
    }

    /// Rows `[from, to)` as a new frame.
    pub fn slice(&self, from: usize, to: usize) -> TraceFrame {
        let to = to.min(self.len());
        let from = from.min(to);
        TraceFrame {
            tick_interval: self.tick_interval,
            start_time: self.timestamp(from),
            names: self.names.clone(),
            data: self.data.slice(ndarray::s![from..to, ..]).to_owned(),
        }
    }

    /// Copy with columns permuted into canonical order.
    pub fn to_canonical(&self) -> TraceFrame {
        let mut data = Array2::zeros((self.len(), N_FEATURES));
        for (j, n) in self.names.iter().enumerate() {
            let dst = feature_index(n).expect("validated on construction");
            data.column_mut(dst).assign(&self.data.column(j));
        }
        TraceFrame {
            tick_interval: self.tick_interval,
            start_time: self.start_time,
            names: FEATURES.iter().map(|s| s.to_string()).collect(),
            data,
        }
    }
}
