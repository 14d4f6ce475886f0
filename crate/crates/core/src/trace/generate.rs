use std::f64::consts::PI;

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{TraceError, TraceFrame, DEFAULT_TICK_SECONDS, N_FEATURES};
use crate::rng;

/// 2023-07-01T00:00:00Z.
const DEFAULT_START: i64 = 1_688_169_600;

/// Parameters of the synthetic tidal workload.
///
/// The CPU signal is `base_level + daily_amplitude * s(h)` where `s` is a
/// zero-mean daily profile built from Gaussian bumps centred on
/// `peak_hours` and scaled so its maximum is exactly 1. Noise and bursts sit
/// on top, then the result is clipped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkloadSpec {
    pub duration_ticks: usize,
    pub base_level: f64,
    pub daily_amplitude: f64,
    pub peak_hours: Vec<f64>,
    pub peak_width_hours: f64,
    pub noise_sigma: f64,
    pub burst_probability: f64,
    pub burst_magnitude: f64,
    pub seed: u64,
    pub start_time: i64,
    pub tick_interval: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self {
            duration_ticks: 30 * 288,
            base_level: 0.45,
            daily_amplitude: 0.40,
            peak_hours: vec![10.0, 20.0],
            peak_width_hours: 1.6,
            noise_sigma: 0.02,
            burst_probability: 0.005,
            burst_magnitude: 0.10,
            seed: 0,
            start_time: DEFAULT_START,
            tick_interval: DEFAULT_TICK_SECONDS,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), TraceError> {
        let bad = |m: String| Err(TraceError::InvalidSpec(m));
        if self.duration_ticks == 0 {
            return Err(TraceError::Empty);
        }
        for (name, v) in [
            ("base_level", self.base_level),
            ("daily_amplitude", self.daily_amplitude),
            ("noise_sigma", self.noise_sigma),
            ("burst_probability", self.burst_probability),
            ("burst_magnitude", self.burst_magnitude),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} outside [0, 1]"));
            }
        }
        if self.peak_width_hours <= 0.0 || !self.peak_width_hours.is_finite() {
            return bad(format!(
                "peak_width_hours = {} must be > 0",
                self.peak_width_hours
            ));
        }
        if let Some(h) = self.peak_hours.iter().find(|h| !(0.0..24.0).contains(*h)) {
            return bad(format!("peak hour {h} outside [0, 24)"));
        }
        if self.tick_interval == 0 {
            return bad("tick_interval must be > 0".into());
        }
        Ok(())
    }
}

/// Zero-mean, max-one daily profile sampled once per minute.
struct DailyProfile {
    peaks: Vec<f64>,
    width: f64,
    mean: f64,
    max: f64,
}

impl DailyProfile {
    fn new(peaks: &[f64], width: f64) -> Self {
        let mut p = DailyProfile {
            peaks: peaks.to_vec(),
            width,
            mean: 0.0,
            max: 0.0,
        };
        let samples: Vec<f64> = (0..1440).map(|m| p.raw(m as f64 / 60.0)).collect();
        p.mean = samples.iter().sum::<f64>() / samples.len() as f64;
        p.max = samples.iter().cloned().fold(f64::MIN, f64::max);
        p
    }

    fn raw(&self, hour: f64) -> f64 {
        self.peaks
            .iter()
            .map(|&c| {
                let d = (hour - c).abs();
                let d = d.min(24.0 - d);
                (-(d * d) / (2.0 * self.width * self.width)).exp()
            })
            .fold(0.0, f64::max)
    }

    fn shape(&self, hour: f64) -> f64 {
        if self.peaks.is_empty() || self.max - self.mean <= 0.0 {
            return 0.0;
        }
        (self.raw(hour) - self.mean) / (self.max - self.mean)
    }
}

fn hour_of_day(ts: i64) -> f64 {
    ts.rem_euclid(86_400) as f64 / 3600.0
}

/// Synthesizes a 14-column tidal trace. Bit-identical for identical specs.
pub fn generate_workload(spec: &WorkloadSpec) -> Result<TraceFrame, TraceError> {
    spec.validate()?;
    let n = spec.duration_ticks;
    let profile = DailyProfile::new(&spec.peak_hours, spec.peak_width_hours);
    let mut rng = rng::seeded(spec.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut data = Array2::zeros((n, N_FEATURES));
    let mut burst = 0.0_f64;

    for k in 0..n {
        let ts = spec.start_time + (k as i64) * spec.tick_interval as i64;
        let hour = hour_of_day(ts);

        burst *= 0.5;
        if rng.random::<f64>() < spec.burst_probability {
            burst += spec.burst_magnitude;
        }
        let load = (spec.base_level + spec.daily_amplitude * profile.shape(hour) + burst).clamp(0.0, 1.0);

        let mut noise = || spec.noise_sigma * unit.sample(&mut rng);
        let cpu = (load + noise()).clamp(0.0, 1.0);
        let mem = (0.55 + 0.25 * load + 0.5 * noise()).clamp(0.0, 1.0);
        let storage = (0.30 + 0.30 * load + 0.5 * noise()).clamp(0.0, 1.0);
        let disk_read = (2000.0 * load + 100.0 * noise()).max(0.0);
        let disk_write = (1200.0 * cpu).max(0.0);
        let net_in = (400.0 * cpu + 20.0 * noise()).max(0.0);
        let net_out = (600.0 * cpu + 30.0 * noise()).max(0.0);
        let request_rate = 1000.0 * cpu;
        let active_connections = (20.0 * request_rate).round();
        let error_rate = 0.001 + 0.02 * (cpu - 0.8).max(0.0);
        let queue_depth = 2.0 * cpu / (1.0 - cpu.min(0.95));
        let p99_latency = 2.5 * 12.4 / (1.0 - cpu.min(0.99));
        let angle = 2.0 * PI * hour / 24.0;

        let row = [
            cpu,
            mem,
            storage,
            disk_read,
            disk_write,
            net_in,
            net_out,
            request_rate,
            active_connections,
            error_rate,
            queue_depth,
            p99_latency,
            angle.sin(),
            angle.cos(),
        ];
        for (j, v) in row.into_iter().enumerate() {
            data[[k, j]] = v;
        }
    }

    TraceFrame::canonical(spec.start_time, spec.tick_interval, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_variation_is_flat() {
        let spec = WorkloadSpec {
            duration_ticks: 500,
            daily_amplitude: 0.0,
            noise_sigma: 0.0,
            burst_probability: 0.0,
            base_level: 0.45,
            ..Default::default()
        };
        let f = generate_workload(&spec).unwrap();
        assert!(f.column_values("cpu_util").unwrap().iter().all(|&v| v == 0.45));
    }

    #[test]
    fn calibrated_month_matches_load_envelope() {
        let spec = WorkloadSpec {
            seed: 11,
            ..Default::default()
        };
        let f = generate_workload(&spec).unwrap();
        assert_eq!(f.len(), 8640);
        let cpu = f.column_values("cpu_util").unwrap();
        let mean = cpu.mean().unwrap();
        let max = cpu.iter().cloned().fold(f64::MIN, f64::max);
        let min = cpu.iter().cloned().fold(f64::MAX, f64::min);
        assert!((0.40..=0.50).contains(&mean), "mean {mean}");
        assert!(max >= 0.80, "max {max}");
        assert!(min <= 0.30, "min {min}");
    }

    #[test]
    fn seeds_control_output() {
        let spec = WorkloadSpec {
            duration_ticks: 600,
            seed: 7,
            ..Default::default()
        };
        let a = generate_workload(&spec).unwrap();
        let b = generate_workload(&spec).unwrap();
        let c = generate_workload(&WorkloadSpec { seed: 8, ..spec }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_duration_is_an_error() {
        let spec = WorkloadSpec {
            duration_ticks: 0,
            ..Default::default()
        };
        assert!(matches!(generate_workload(&spec), Err(TraceError::Empty)));
    }

    #[test]
    fn daily_cycle_peaks_at_configured_hours() {
        let spec = WorkloadSpec {
            duration_ticks: 288,
            noise_sigma: 0.0,
            burst_probability: 0.0,
            ..Default::default()
        };
        let f = generate_workload(&spec).unwrap();
        let cpu = f.column_values("cpu_util").unwrap();
        // 10:00 is tick 120 from a midnight start.
        assert!((cpu[120] - 0.85).abs() < 1e-9, "{}", cpu[120]);
        assert!(cpu[36] < 0.3);
    }
}
