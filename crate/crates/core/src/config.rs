//! The single JSON run configuration shared by every CLI stage.
//!
//! Missing fields take their defaults. Validation walks the whole document
//! and reports every problem with its dotted field path.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::agent::{DqnConfig, RewardConfig};
use crate::forecast::{ModelShape, TrainConfig};
use crate::optimize::{ObjectiveWeights, PsoConfig};
use crate::report::CostRates;
use crate::simenv::{ClusterConfig, ConstraintSet};
use crate::trace::{feature_index, PrepConfig, WorkloadSpec, N_FEATURES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceSection {
    pub workload: WorkloadSpec,
    /// Ingest this CSV instead of generating a workload.
    pub input_path: Option<String>,
}

impl Default for TraceSection {
    fn default() -> Self {
        Self {
            workload: WorkloadSpec {
                duration_ticks: 14 * 288,
                ..WorkloadSpec::default()
            },
            input_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastSection {
    pub lstm_sizes: Vec<usize>,
    pub dense_sizes: Vec<usize>,
    pub window_len: usize,
    pub horizon: usize,
    pub dropout_rate: f64,
    pub target_metric: String,
    /// Share of windows (and of trace ticks) used for training.
    pub split_ratio: f64,
    pub train: TrainConfig,
}

impl Default for ForecastSection {
    fn default() -> Self {
        let desk = ModelShape::desk();
        Self {
            lstm_sizes: desk.lstm_sizes,
            dense_sizes: desk.dense_sizes,
            window_len: 24,
            horizon: desk.horizon,
            dropout_rate: desk.dropout_rate,
            target_metric: "cpu_util".into(),
            split_ratio: 0.8,
            train: TrainConfig {
                epochs: 30,
                initial_lr: 0.05,
                ..TrainConfig::default()
            },
        }
    }
}

impl ForecastSection {
    pub fn shape(&self) -> ModelShape {
        ModelShape {
            input_size: N_FEATURES,
            lstm_sizes: self.lstm_sizes.clone(),
            dense_sizes: self.dense_sizes.clone(),
            horizon: self.horizon,
            dropout_rate: self.dropout_rate,
        }
    }
}

/// Where the scheduler's demand forecasts come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastSource {
    /// The trained forecast checkpoint.
    Model,
    /// Last observed demand.
    Persistence,
    /// Perfect foresight (upper bound for comparisons).
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSection {
    pub dqn: DqnConfig,
    pub reward: RewardConfig,
    pub forecast_source: ForecastSource,
}

impl Default for AgentSection {
    fn default() -> Self {
        Self {
            dqn: DqnConfig::default(),
            reward: RewardConfig::default(),
            forecast_source: ForecastSource::Model,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveSection {
    /// Used as given unless `tune` is set; normalized onto the simplex.
    pub weights: ObjectiveWeights,
    /// Tune the weights with PSO against the simulator.
    pub tune: bool,
    pub pso: PsoConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every stage seed is derived from it.
    pub seed: u64,
    pub output_dir: String,
    pub trace: TraceSection,
    pub preprocessing: PrepConfig,
    pub forecast: ForecastSection,
    pub cluster: ClusterConfig,
    pub constraints: ConstraintSet,
    pub agent: AgentSection,
    pub objective: ObjectiveSection,
    pub costs: CostRates,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            output_dir: "out".into(),
            trace: TraceSection::default(),
            preprocessing: PrepConfig::default(),
            forecast: ForecastSection::default(),
            cluster: ClusterConfig::default(),
            constraints: ConstraintSet::default(),
            agent: AgentSection::default(),
            objective: ObjectiveSection::default(),
            costs: CostRates::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError {
    pub issues: Vec<ConfigIssue>,
}

impl ConfigError {
    fn single(path: &str, message: impl Into<String>) -> Self {
        Self {
            issues: vec![ConfigIssue {
                path: path.into(),
                message: message.into(),
            }],
        }
    }

    pub fn has_path(&self, path: &str) -> bool {
        self.issues.iter().any(|i| i.path == path)
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config")?;
        for i in &self.issues {
            write!(f, "\n  {i}")?;
        }
        Ok(())
    }
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

/// Overlays `user` onto `defaults` key by key. Unknown keys and values that
/// make their section fail to deserialize are recorded and left at their
/// default, so one bad field never hides another.
fn overlay(
    defaults: &mut Map<String, Value>,
    user: &Map<String, Value>,
    prefix: &str,
    issues: &mut Vec<ConfigIssue>,
) {
    for (key, value) in user {
        let path = join(prefix, key);
        match defaults.get_mut(key) {
            None => issues.push(ConfigIssue {
                path,
                message: "unknown field".into(),
            }),
            Some(Value::Object(inner)) if value.is_object() => {
                overlay(inner, value.as_object().expect("checked"), &path, issues);
            }
            Some(slot) => *slot = value.clone(),
        }
    }
}

/// Finds every leaf whose value alone breaks deserialization.
fn type_errors(defaults: &Value, merged: &Value, root: &Value, path: &str, issues: &mut Vec<ConfigIssue>) {
    let (Value::Object(d), Value::Object(m)) = (defaults, merged) else {
        return;
    };
    for (key, mv) in m {
        let Some(dv) = d.get(key) else { continue };
        if dv == mv {
            continue;
        }
        let p = join(path, key);
        if dv.is_object() && mv.is_object() {
            type_errors(dv, mv, root, &p, issues);
            continue;
        }
        let mut trial = root.clone();
        set_path(&mut trial, &p, mv.clone());
        if let Err(e) = serde_json::from_value::<RunConfig>(trial) {
            issues.push(ConfigIssue {
                path: p,
                message: strip_position(&e.to_string()),
            });
        }
    }
}

fn strip_position(msg: &str) -> String {
    msg.split(" at line ").next().unwrap_or(msg).to_string()
}

fn set_path(doc: &mut Value, path: &str, v: Value) {
    let mut cur = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let Value::Object(map) = cur else { return };
        if i + 1 == parts.len() {
            map.insert(part.to_string(), v);
            return;
        }
        cur = map.entry(part.to_string()).or_insert(Value::Object(Map::new()));
    }
}

/// Parses and validates a config document. The empty object yields the
/// defaults.
pub fn validate_config(text: &str) -> Result<RunConfig, ConfigError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| ConfigError::single("$", e.to_string()))?;
    let Value::Object(user) = doc else {
        return Err(ConfigError::single("$", "config must be a JSON object"));
    };
    let defaults = serde_json::to_value(RunConfig::default()).expect("defaults serialize");
    let mut merged = defaults.clone();
    let mut issues = Vec::new();
    overlay(merged.as_object_mut().expect("object"), &user, "", &mut issues);

    let config = match serde_json::from_value::<RunConfig>(merged.clone()) {
        Ok(c) => Some(c),
        Err(_) => {
            // Isolate each offending field against an otherwise-default
            // document, then reset those fields so range rules still run.
            let mut found = Vec::new();
            type_errors(&defaults, &merged, &defaults, "", &mut found);
            for issue in &found {
                if let Some(d) = defaults.pointer(&format!("/{}", issue.path.replace('.', "/"))) {
                    set_path(&mut merged, &issue.path, d.clone());
                }
            }
            let repaired = serde_json::from_value::<RunConfig>(merged).ok();
            if found.is_empty() || repaired.is_none() {
                found.push(ConfigIssue {
                    path: "$".into(),
                    message: "document does not match the config schema".into(),
                });
            }
            issues.extend(found);
            repaired
        }
    };
    if let Some(c) = &config {
        issues.extend(range_issues(c));
    }
    match config {
        Some(mut c) if issues.is_empty() => {
            let w = c.objective.weights;
            c.objective.weights = ObjectiveWeights::new(w.w1, w.w2, w.w3).expect("checked by range rules");
            Ok(c)
        }
        _ => Err(ConfigError { issues }),
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::single("$", format!("{}: {e}", path.display())))?;
    validate_config(&text)
}

fn range_issues(c: &RunConfig) -> Vec<ConfigIssue> {
    let mut out = Vec::new();
    let mut check = |ok: bool, path: &str, message: String| {
        if !ok {
            out.push(ConfigIssue {
                path: path.into(),
                message,
            });
        }
    };
    let unit_open = |v: f64| v > 0.0 && v < 1.0;

    if let Some(p) = &c.trace.input_path {
        check(
            Path::new(p).exists(),
            "trace.input_path",
            format!("{p} does not exist"),
        );
    }
    if let Err(e) = c.trace.workload.validate() {
        check(false, "trace.workload", e.to_string());
    }

    let a = c.preprocessing.alpha;
    check(
        a > 0.0 && a <= 1.0,
        "preprocessing.alpha",
        format!("{a} outside (0, 1]"),
    );
    check(
        c.preprocessing.interval > 0,
        "preprocessing.interval",
        "must be > 0".into(),
    );

    let f = &c.forecast;
    check(
        !f.lstm_sizes.is_empty() && !f.lstm_sizes.contains(&0),
        "forecast.lstm_sizes",
        "needs at least one layer, all sizes ≥ 1".into(),
    );
    check(
        !f.dense_sizes.contains(&0),
        "forecast.dense_sizes",
        "sizes must be ≥ 1".into(),
    );
    check(f.window_len >= 1, "forecast.window_len", "must be ≥ 1".into());
    check(f.horizon >= 1, "forecast.horizon", "must be ≥ 1".into());
    check(
        (0.0..1.0).contains(&f.dropout_rate),
        "forecast.dropout_rate",
        format!("{} outside [0, 1)", f.dropout_rate),
    );
    check(
        feature_index(&f.target_metric).is_some(),
        "forecast.target_metric",
        format!("unknown metric {:?}", f.target_metric),
    );
    check(
        unit_open(f.split_ratio),
        "forecast.split_ratio",
        format!("{} outside (0, 1)", f.split_ratio),
    );
    let t = &f.train;
    check(
        t.initial_lr > 0.0 && t.initial_lr.is_finite(),
        "forecast.train.initial_lr",
        "must be > 0".into(),
    );
    check(
        (0.0..=t.initial_lr).contains(&t.lr_min),
        "forecast.train.lr_min",
        "must be in [0, initial_lr]".into(),
    );
    check(
        t.batch_size >= 1,
        "forecast.train.batch_size",
        "must be ≥ 1".into(),
    );
    check(
        t.gradient_clip > 0.0,
        "forecast.train.gradient_clip",
        "must be > 0".into(),
    );
    check(
        (0.0..1.0).contains(&t.momentum),
        "forecast.train.momentum",
        "must be in [0, 1)".into(),
    );

    if let Err(e) = c.cluster.validate() {
        check(false, "cluster", e.to_string());
    }
    if let Err(e) = c.constraints.validate() {
        check(false, "constraints", e.to_string());
    }
    if let Err(e) = c.agent.dqn.validate() {
        check(false, "agent.dqn", e.to_string());
    }
    let r = &c.agent.reward;
    check(
        r.vm_cost >= 0.0 && r.vm_cost.is_finite(),
        "agent.reward.vm_cost",
        "must be ≥ 0".into(),
    );
    check(
        r.action_cost >= 0.0 && r.action_cost.is_finite(),
        "agent.reward.action_cost",
        "must be ≥ 0".into(),
    );
    check(
        r.vm_cost + r.action_cost > 0.0,
        "agent.reward",
        "vm_cost and action_cost cannot both be 0".into(),
    );

    let w = c.objective.weights;
    check(
        ObjectiveWeights::new(w.w1, w.w2, w.w3).is_some(),
        "objective.weights",
        "must be non-negative, finite and not all zero".into(),
    );
    if let Err(e) = c.objective.pso.validate() {
        check(false, "objective.pso", e.to_string());
    }
    if c.objective.pso.bounds.len() != 3 {
        check(
            false,
            "objective.pso.bounds",
            "weight tuning needs exactly 3 dimensions".into(),
        );
    }
    for (name, v) in [
        ("costs.server", c.costs.server),
        ("costs.bandwidth", c.costs.bandwidth),
        ("costs.storage", c.costs.storage),
        ("costs.labor", c.costs.labor),
    ] {
        check(v >= 0.0 && v.is_finite(), name, format!("{v} must be ≥ 0"));
    }
    out
}
