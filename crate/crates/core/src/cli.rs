//! Command-line frontend: one subcommand per pipeline stage, each reading the
//! previous stage's files from the output directory and writing new ones.
//!
//! Exit codes: 0 success, 1 invalid usage/config/missing input, 2 runtime
//! failure.

use std::ffi::OsString;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::agent::{load_agent, save_agent, train_agent, DqnPolicy, StaticPolicy, ThresholdReactive};
use crate::config::{load_config, validate_config, ForecastSource, RunConfig};
use crate::forecast::{
    evaluate, evaluate_baseline, load_checkpoint, save_checkpoint, train, BaselineKind, ForecastModel,
};
use crate::optimize::{
    simulation_harness_score, tune_objective_weights, write_tuning_log, ObjectivePolicy, ObjectiveWeights,
    TuningHarness,
};
use crate::report::{compare_runs, emit_report, parse_report, RunReport};
use crate::rng::derive_seed;
use crate::simenv::{read_episode_csv, run_episode, write_episode_csv, EpisodeTrace, ForecastTrack, Policy};
use crate::trace::{
    generate_workload, ingest_csv, ingest_csv_raw, make_windows, preprocess_columns, split_train_test,
    write_csv, ScalerParams, TraceFrame,
};

/// Stream indices for seeds derived from the master seed.
mod stream {
    pub const WORKLOAD: u64 = 1;
    pub const FORECAST_INIT: u64 = 2;
    pub const FORECAST_TRAIN: u64 = 3;
    pub const AGENT: u64 = 4;
    pub const TUNING: u64 = 5;
    pub const EPISODE: u64 = 6;
}

#[derive(Parser)]
#[command(
    name = "cloudalloc",
    version,
    about = "Forecast-driven cloud resource allocation pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyName {
    Static,
    #[value(name = "threshold_reactive", alias = "threshold")]
    Threshold,
    Dqn,
    #[value(name = "objective_greedy", alias = "objective")]
    Objective,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic workload trace (trace.csv).
    Gen(Common),
    /// Clean, resample and scale a trace (prepared.csv, scaler.json, prep_report.json).
    Prep {
        #[command(flatten)]
        common: Common,
        /// Raw trace CSV; defaults to the configured input path or <out>/trace.csv.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Train the demand forecaster (forecast.json, forecast_loss.csv, forecast_metrics.json).
    TrainForecast(Common),
    /// Train the scheduler (agent.json, agent_training_log.csv).
    TrainAgent(Common),
    /// Tune objective weights with PSO (objective_weights.json, tuning_log.csv).
    TuneWeights(Common),
    /// Replay the held-out trace under a policy (episode_<policy>.csv).
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "dqn")]
        policy: PolicyName,
    },
    /// Summarize an episode (report_<policy>.json plus plot CSVs).
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Episode CSV; defaults to <out>/episode_dqn.csv.
        #[arg(long)]
        episode: Option<PathBuf>,
    },
    /// Compare two reports (comparison_<baseline>_vs_<candidate>.json).
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        candidate: PathBuf,
    },
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Runtime(String),
}

fn rt(e: impl Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn need(path: &Path) -> Result<&Path, CliError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::Validation(format!(
            "required input {} does not exist",
            path.display()
        )))
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(CliError::Validation(m)) => {
            eprintln!("error: {m}");
            1
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            2
        }
    }
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
}

impl Ctx {
    fn new(common: &Common) -> Result<Self, CliError> {
        let mut cfg = match &common.config {
            Some(p) => {
                need(p)?;
                load_config(p).map_err(|e| CliError::Validation(e.to_string()))?
            }
            None => validate_config("{}").map_err(|e| CliError::Validation(e.to_string()))?,
        };
        if let Some(s) = common.seed {
            cfg.seed = s;
        }
        let out = common
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
        Ok(Self { cfg, out })
    }

    fn seed(&self, stream: u64) -> u64 {
        derive_seed(self.cfg.seed, stream)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn ensure_out(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.out).map_err(|e| rt(format!("{}: {e}", self.out.display())))
    }

    fn write(&self, name: &str, body: String) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        std::fs::write(&p, body).map_err(|e| rt(format!("{}: {e}", p.display())))?;
        Ok(p)
    }

    fn prepared(&self) -> Result<TraceFrame, CliError> {
        ingest_csv(need(&self.path("prepared.csv"))?).map_err(rt)
    }

    fn scaler(&self) -> Result<ScalerParams, CliError> {
        let p = self.path("scaler.json");
        let text = std::fs::read_to_string(need(&p)?).map_err(|e| rt(format!("{}: {e}", p.display())))?;
        serde_json::from_str(&text).map_err(|e| rt(format!("{}: {e}", p.display())))
    }

    /// Tick where the held-out part of the trace begins.
    fn cut(&self, frame: &TraceFrame) -> usize {
        (self.cfg.forecast.split_ratio * frame.len() as f64).floor() as usize
    }

    /// Forecasts over the whole prepared trace from the configured source.
    fn track(&self, frame: &TraceFrame) -> Result<ForecastTrack, CliError> {
        let cluster = &self.cfg.cluster;
        let h = self.cfg.forecast.horizon;
        match self.cfg.agent.forecast_source {
            ForecastSource::Persistence => ForecastTrack::persistence(frame, cluster, h).map_err(rt),
            ForecastSource::Oracle => ForecastTrack::oracle(frame, cluster, h).map_err(rt),
            ForecastSource::Model => {
                let model = load_checkpoint(need(&self.path("forecast.json"))?).map_err(rt)?;
                let normalized = self.scaler()?.transform(frame).map_err(rt)?;
                ForecastTrack::from_model(&model, &normalized, frame, cluster, self.cfg.forecast.window_len)
                    .map_err(rt)
            }
        }
    }
}

fn split_track(track: &ForecastTrack, cut: usize) -> (ForecastTrack, ForecastTrack) {
    let part = |rows: &[Vec<f64>]| ForecastTrack {
        source: track.source.clone(),
        horizon: track.horizon,
        rows: rows.to_vec(),
    };
    (part(&track.rows[..cut]), part(&track.rows[cut..]))
}

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Gen(common) => {
            let ctx = Ctx::new(&common)?;
            let mut spec = ctx.cfg.trace.workload.clone();
            spec.seed = ctx.seed(stream::WORKLOAD);
            let frame = generate_workload(&spec).map_err(rt)?;
            ctx.ensure_out()?;
            write_csv(&frame, ctx.path("trace.csv")).map_err(rt)
        }
        Command::Prep { common, input } => {
            let ctx = Ctx::new(&common)?;
            let input = input
                .or_else(|| ctx.cfg.trace.input_path.clone().map(PathBuf::from))
                .unwrap_or_else(|| ctx.path("trace.csv"));
            let raw = ingest_csv_raw(need(&input)?).map_err(rt)?;
            let prepared = preprocess_columns(&raw.series(), &ctx.cfg.preprocessing).map_err(rt)?;
            ctx.ensure_out()?;
            write_csv(&prepared.resampled, ctx.path("prepared.csv")).map_err(rt)?;
            ctx.write("scaler.json", json(&prepared.scaler)?)?;
            ctx.write("prep_report.json", json(&prepared.report)?)?;
            Ok(())
        }
        Command::TrainForecast(common) => {
            let ctx = Ctx::new(&common)?;
            let frame = ctx.prepared()?;
            let scaler = ctx.scaler()?;
            let f = &ctx.cfg.forecast;
            let normalized = scaler.transform(&frame).map_err(rt)?;
            let windows = make_windows(&normalized, f.window_len, f.horizon, &f.target_metric).map_err(rt)?;
            let (train_set, test_set) = split_train_test(&windows, f.split_ratio).map_err(rt)?;
            let mut model = ForecastModel::init(f.shape(), ctx.seed(stream::FORECAST_INIT)).map_err(rt)?;
            model.scaler = scaler.get(&f.target_metric);
            model.target_metric = f.target_metric.clone();
            let mut tc = f.train.clone();
            tc.seed = ctx.seed(stream::FORECAST_TRAIN);
            let (model, curve) = train(&model, &train_set, &tc).map_err(rt)?;
            let lstm = evaluate(&model, &test_set).map_err(rt)?;
            let persistence =
                evaluate_baseline(BaselineKind::Persistence, &test_set, model.scaler).map_err(rt)?;
            ctx.ensure_out()?;
            save_checkpoint(&model, ctx.path("forecast.json")).map_err(rt)?;
            let mut loss = String::from("epoch,loss\n");
            for (e, l) in curve.iter().enumerate() {
                loss.push_str(&format!("{e},{l}\n"));
            }
            ctx.write("forecast_loss.csv", loss)?;
            let metrics = serde_json::json!({ "lstm": lstm, "persistence": persistence });
            ctx.write("forecast_metrics.json", json(&metrics)?)?;
            Ok(())
        }
        Command::TrainAgent(common) => {
            let ctx = Ctx::new(&common)?;
            let frame = ctx.prepared()?;
            let track = ctx.track(&frame)?;
            let cut = ctx.cut(&frame);
            let (train_track, _) = split_track(&track, cut);
            let a = &ctx.cfg.agent;
            let mut dqn = a.dqn.clone();
            dqn.seed = ctx.seed(stream::AGENT);
            let (q, log) = train_agent(
                &frame.slice(0, cut),
                &train_track,
                &ctx.cfg.cluster,
                &ctx.cfg.constraints,
                &a.reward,
                &dqn,
            )
            .map_err(rt)?;
            ctx.ensure_out()?;
            save_agent(
                ctx.path("agent.json"),
                &q,
                log.final_epsilon,
                dqn.gamma,
                a.reward.weights,
            )
            .map_err(rt)?;
            let mut csv = String::from("episode,return,mean_loss\n");
            for (i, (r, l)) in log.episode_returns.iter().zip(&log.episode_losses).enumerate() {
                csv.push_str(&format!("{i},{r},{l}\n"));
            }
            ctx.write("agent_training_log.csv", csv)?;
            Ok(())
        }
        Command::TuneWeights(common) => {
            let ctx = Ctx::new(&common)?;
            let frame = ctx.prepared()?;
            let track = ctx.track(&frame)?;
            let cut = ctx.cut(&frame);
            let (train_track, _) = split_track(&track, cut);
            let train_frame = frame.slice(0, cut);
            let harness = TuningHarness {
                frame: &train_frame,
                track: &train_track,
                cluster: &ctx.cfg.cluster,
                constraints: &ctx.cfg.constraints,
                seed: ctx.seed(stream::TUNING),
            };
            let mut pso = ctx.cfg.objective.pso.clone();
            pso.seed = ctx.seed(stream::TUNING);
            let (weights, result) =
                tune_objective_weights(|w| simulation_harness_score(&harness, w), &pso).map_err(rt)?;
            ctx.ensure_out()?;
            ctx.write("objective_weights.json", json(&weights)?)?;
            write_tuning_log(&result, &ctx.path("tuning_log.csv")).map_err(rt)
        }
        Command::Simulate { common, policy } => {
            let ctx = Ctx::new(&common)?;
            let frame = ctx.prepared()?;
            let mut p: Box<dyn Policy> = match policy {
                PolicyName::Static => Box::new(StaticPolicy),
                PolicyName::Threshold => Box::new(ThresholdReactive::default()),
                PolicyName::Dqn => Box::new(DqnPolicy {
                    q: load_agent(need(&ctx.path("agent.json"))?).map_err(rt)?.0,
                }),
                PolicyName::Objective => {
                    let weights = if ctx.cfg.objective.tune {
                        let p = ctx.path("objective_weights.json");
                        let text = std::fs::read_to_string(need(&p)?).map_err(rt)?;
                        serde_json::from_str::<ObjectiveWeights>(&text).map_err(rt)?
                    } else {
                        ctx.cfg.objective.weights
                    };
                    Box::new(ObjectivePolicy { weights })
                }
            };
            let track = ctx.track(&frame)?;
            let cut = ctx.cut(&frame);
            let (_, eval_track) = split_track(&track, cut);
            let eval_frame = frame.slice(cut, frame.len());
            let (cluster, constraints, reward) =
                (&ctx.cfg.cluster, &ctx.cfg.constraints, &ctx.cfg.agent.reward);
            let trace = run_episode(
                &eval_frame,
                &eval_track,
                cluster,
                constraints,
                p.as_mut(),
                &|o| reward.reward(o, cluster, constraints),
                ctx.seed(stream::EPISODE),
            )
            .map_err(rt)?;
            ctx.ensure_out()?;
            let path = ctx.path(&format!("episode_{}.csv", trace.policy));
            let file = std::fs::File::create(&path).map_err(|e| rt(format!("{}: {e}", path.display())))?;
            write_episode_csv(&trace, std::io::BufWriter::new(file)).map_err(rt)
        }
        Command::Evaluate { common, episode } => {
            let ctx = Ctx::new(&common)?;
            let path = episode.unwrap_or_else(|| ctx.path("episode_dqn.csv"));
            let file = std::fs::File::open(need(&path)?).map_err(rt)?;
            let rows = read_episode_csv(std::io::BufReader::new(file)).map_err(rt)?;
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let policy = stem.strip_prefix("episode_").unwrap_or(&stem).to_string();
            let trace = EpisodeTrace {
                policy: policy.clone(),
                seed: ctx.seed(stream::EPISODE),
                rows,
            };
            let report = RunReport::from_trace(&trace, &ctx.cfg.constraints, &ctx.cfg.costs).map_err(rt)?;
            ctx.ensure_out()?;
            emit_report(&report, &trace, &ctx.path(&format!("report_{policy}.json"))).map_err(rt)?;
            Ok(())
        }
        Command::Compare {
            common,
            baseline,
            candidate,
        } => {
            let ctx = Ctx::new(&common)?;
            let load = |p: &Path| -> Result<RunReport, CliError> {
                let text = std::fs::read_to_string(need(p)?).map_err(rt)?;
                parse_report(&text).map_err(|e| rt(format!("{}: {e}", p.display())))
            };
            let (b, c) = (load(&baseline)?, load(&candidate)?);
            let cmp = compare_runs(&b, &c).map_err(rt)?;
            ctx.ensure_out()?;
            ctx.write(
                &format!("comparison_{}_vs_{}.json", b.policy, c.policy),
                json(&cmp)?,
            )?;
            Ok(())
        }
    }
}

fn json<T: serde::Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(rt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_subcommand_and_flag_exit_1() {
        assert_eq!(run_command(["cloudalloc", "frobnicate"]), 1);
        assert_eq!(run_command(["cloudalloc", "gen", "--bogus"]), 1);
        assert_eq!(run_command(["cloudalloc", "gen", "--help"]), 0);
    }

    #[test]
    fn missing_inputs_are_validation_errors() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        assert_eq!(
            run_command(["cloudalloc", "simulate", "--out", out, "--policy", "static"]),
            1
        );
        assert_eq!(
            run_command(["cloudalloc", "prep", "--out", out, "--input", "/no/such.csv"]),
            1
        );
        assert_eq!(run_command(["cloudalloc", "gen", "--config", "/no/such.json"]), 1);
    }

    #[test]
    fn invalid_config_exits_1() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"forecast": {"dropout_rate": 1.5}}"#).unwrap();
        assert_eq!(
            run_command(["cloudalloc", "gen", "--config", cfg.to_str().unwrap()]),
            1
        );
    }
}
