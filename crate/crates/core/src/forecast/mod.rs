//! Stacked LSTM demand forecaster trained from scratch, plus naive baselines
//! and accuracy metrics.

mod checkpoint;
mod lstm;
mod model;

use thiserror::Error;

pub use checkpoint::{
    load_checkpoint, parse_checkpoint, save_checkpoint, to_checkpoint_json, CHECKPOINT_VERSION,
};
pub use lstm::LstmLayer;
pub use model::{
    baseline_predict, cosine_lr, evaluate, evaluate_baseline, forecast_metrics, init_model, train,
    BaselineKind, ForecastMetrics, ForecastModel, ForecastParams, ModelShape, TrainConfig,
};

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error("layer sizes must all be positive")]
    ZeroSizeLayer,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: expected {expected}, got {actual}")]
    InvalidShape { expected: String, actual: String },
    #[error("empty batch or dataset")]
    EmptyBatch,
    #[error("training diverged at epoch {epoch} (lr {lr}); try a lower learning rate")]
    Diverged { epoch: usize, lr: f64 },
    #[error("MAPE undefined: every target is zero (RMSE {rmse})")]
    MapeUndefined { rmse: f64 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
