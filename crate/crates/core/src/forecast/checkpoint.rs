//! JSON checkpoints: architecture, target scaling and row-major tensors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ForecastError, ForecastModel, ModelShape};
use crate::nn::{Parameters, TensorRecord};
use crate::trace::ColumnScale;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    format_version: u32,
    layer_sizes: Vec<usize>,
    horizon: usize,
    input_size: usize,
    dense_sizes: Vec<usize>,
    dropout_rate: f64,
    target_metric: String,
    scaler: Option<ColumnScale>,
    tensors: Vec<TensorRecord>,
}

pub fn to_checkpoint_json(model: &ForecastModel) -> String {
    let ck = Checkpoint {
        format_version: CHECKPOINT_VERSION,
        layer_sizes: model.shape.lstm_sizes.clone(),
        horizon: model.shape.horizon,
        input_size: model.shape.input_size,
        dense_sizes: model.shape.dense_sizes.clone(),
        dropout_rate: model.shape.dropout_rate,
        target_metric: model.target_metric.clone(),
        scaler: model.scaler,
        tensors: model.params.to_records(),
    };
    serde_json::to_string_pretty(&ck).expect("checkpoint serializes")
}

/// Parses and validates a checkpoint document.
pub fn parse_checkpoint(text: &str) -> Result<ForecastModel, ForecastError> {
    let err = |m: String| ForecastError::Checkpoint(m);
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
    match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == CHECKPOINT_VERSION as u64 => {}
        Some(v) => return Err(err(format!("unsupported format_version {v}"))),
        None => return Err(err("missing format_version".into())),
    }
    let ck: Checkpoint = serde_json::from_value(value).map_err(|e| err(e.to_string()))?;
    let shape = ModelShape {
        input_size: ck.input_size,
        lstm_sizes: ck.layer_sizes,
        dense_sizes: ck.dense_sizes,
        horizon: ck.horizon,
        dropout_rate: ck.dropout_rate,
    };
    if shape
        .lstm_sizes
        .iter()
        .chain(&shape.dense_sizes)
        .any(|&s| s > 1 << 14)
        || shape.input_size > 1 << 14
        || shape.horizon > 1 << 14
    {
        return Err(err("layer size out of range".into()));
    }
    if let Some(s) = ck.scaler {
        if !(s.min.is_finite() && s.max.is_finite() && s.max >= s.min) {
            return Err(err("invalid scaler".into()));
        }
    }
    // Tensor count and shapes are checked before allocating the model.
    let expected = 3 * shape.lstm_sizes.len() + 2 * (shape.dense_sizes.len() + 1);
    if ck.tensors.len() != expected {
        return Err(err(format!(
            "expected {expected} tensors, found {}",
            ck.tensors.len()
        )));
    }
    let declared: usize = ck.tensors.iter().map(|t| t.values.len()).sum();
    let mut model = ForecastModel::init(shape, 0)?;
    if declared != model.params.param_count() {
        return Err(err(format!(
            "expected {} values, found {declared}",
            model.params.param_count()
        )));
    }
    model.params.load_records(&ck.tensors).map_err(err)?;
    model.scaler = ck.scaler;
    model.target_metric = ck.target_metric;
    Ok(model)
}

pub fn save_checkpoint(model: &ForecastModel, path: impl AsRef<Path>) -> Result<(), ForecastError> {
    let path = path.as_ref();
    std::fs::write(path, to_checkpoint_json(model) + "\n").map_err(|source| ForecastError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ForecastModel, ForecastError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ForecastError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_checkpoint(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_model() {
        let mut m = ForecastModel::init(
            ModelShape {
                lstm_sizes: vec![3, 2],
                dense_sizes: vec![4],
                horizon: 2,
                ..ModelShape::default()
            },
            5,
        )
        .unwrap();
        m.scaler = Some(ColumnScale { min: 0.1, max: 0.9 });
        let back = parse_checkpoint(&to_checkpoint_json(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn unknown_version_rejected() {
        let m = ForecastModel::init(
            ModelShape {
                lstm_sizes: vec![2],
                dense_sizes: vec![],
                horizon: 1,
                ..ModelShape::default()
            },
            1,
        )
        .unwrap();
        let text = to_checkpoint_json(&m).replace("\"format_version\": 1", "\"format_version\": 2");
        match parse_checkpoint(&text) {
            Err(ForecastError::Checkpoint(msg)) => assert!(msg.contains("format_version 2")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn garbage_rejected() {
        assert!(parse_checkpoint("").is_err());
        assert!(parse_checkpoint("{\"format_version\":1}").is_err());
    }
}
