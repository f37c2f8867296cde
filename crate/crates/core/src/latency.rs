//! Latency measurement.
//!
//! - camera: decoded display timestamps of a rolling on-screen clock against
//!   frame receive times, `l_camera = t_recv - t_display - l_display`;
//! - proprioception: `l_obs = t_recv - t_robot`, or half the round-trip time
//!   when the hardware does not timestamp;
//! - execution: end-to-end lag between a commanded probe and the measured
//!   response (normalized cross-correlation), minus the observation latency.
//!
//! Repeated measurements are summarized by their median.

use std::f64::consts::PI;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::par::{self, Parallelism};
use crate::se3::PoseTrajectory;
use crate::stats::{mad, median, parabolic_offset};
use crate::stream::{Sample, TimedStream};
use crate::{Error, Result};

/// Minimum normalized-correlation peak accepted by the lag estimator.
pub const MIN_LAG_SCORE: f64 = 0.8;

/// Measured latencies of one deployment, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyProfile {
    pub l_camera: f64,
    pub l_proprio: f64,
    pub l_gripper_exec: f64,
    pub l_robot_exec: f64,
}

impl LatencyProfile {
    pub fn zeros() -> Self {
        Self::default()
    }

    pub fn new(l_camera: f64, l_proprio: f64, l_gripper_exec: f64, l_robot_exec: f64) -> Result<Self> {
        let p = Self {
            l_camera,
            l_proprio,
            l_gripper_exec,
            l_robot_exec,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.fields() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidValue(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    fn fields(&self) -> [(&'static str, f64); 4] {
        [
            ("l_camera", self.l_camera),
            ("l_proprio", self.l_proprio),
            ("l_gripper_exec", self.l_gripper_exec),
            ("l_robot_exec", self.l_robot_exec),
        ]
    }

    /// Non-fatal oddities; currently only "camera is not the slowest
    /// observation stream".
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.l_proprio > self.l_camera {
            w.push(format!(
                "proprioception latency {} s exceeds camera latency {} s",
                self.l_proprio, self.l_camera
            ));
        }
        for msg in &w {
            warn!("{msg}");
        }
        w
    }

    pub fn max_exec(&self) -> f64 {
        self.l_robot_exec.max(self.l_gripper_exec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QrDecode {
    pub t_recv: f64,
    pub t_display: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraLatency {
    /// Median latency over all decodes.
    pub latency: f64,
    /// Median absolute deviation of the per-decode latencies.
    pub spread: f64,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

pub fn camera_latency(decodes: &[QrDecode], l_display: f64) -> Result<CameraLatency> {
    if decodes.is_empty() {
        return Err(Error::Empty("QR decodes"));
    }
    let mut values = Vec::with_capacity(decodes.len());
    for (index, d) in decodes.iter().enumerate() {
        let diff = d.t_recv - d.t_display;
        // Equal timestamps are allowed only for an ideal zero-latency display.
        if !(diff > 0.0 || (diff == 0.0 && l_display == 0.0)) {
            return Err(Error::ClockSkew { index, diff });
        }
        values.push(diff - l_display);
    }
    Ok(CameraLatency {
        latency: median(&values).ok_or(Error::InvalidValue("NaN timestamp".into()))?,
        spread: mad(&values).unwrap_or(0.0),
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        n: values.len(),
    })
}

pub fn proprio_latency(t_robot: f64, t_recv: f64) -> Result<f64> {
    let diff = t_recv - t_robot;
    if !(diff >= 0.0) {
        return Err(Error::ClockSkew { index: 0, diff });
    }
    Ok(diff)
}

/// Median of `t_recv - t_robot` over `(t_robot, t_recv)` pairs.
pub fn proprio_latency_batch(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("proprioception samples"));
    }
    let mut v = Vec::with_capacity(pairs.len());
    for (index, &(t_robot, t_recv)) in pairs.iter().enumerate() {
        v.push(proprio_latency(t_robot, t_recv).map_err(|_| Error::ClockSkew {
            index,
            diff: t_recv - t_robot,
        })?);
    }
    median(&v).ok_or(Error::InvalidValue("NaN timestamp".into()))
}

/// One-way latency approximated as half a round-trip time.
pub fn half_rtt(rtt: f64) -> Result<f64> {
    if !(rtt >= 0.0) || !rtt.is_finite() {
        return Err(Error::InvalidValue(format!("round-trip time {rtt}")));
    }
    Ok(rtt / 2.0)
}

/// Actuator execution latency from an end-to-end lag and the observation
/// latency of the feedback channel.
pub fn exec_latency(l_e2e: f64, l_obs: f64) -> Result<f64> {
    let l = l_e2e - l_obs;
    if l < 0.0 {
        return Err(Error::MeasurementInconsistency(format!(
            "end-to-end latency {l_e2e} s is below observation latency {l_obs} s"
        )));
    }
    Ok(l)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Waveform {
    Sine { freq_hz: f64 },
    /// Linear chirp whose instantaneous frequency sweeps from `f_start` at
    /// t = 0 to `f_end` at t = duration.
    Chirp { f_start: f64, f_end: f64 },
}

impl Waveform {
    pub fn is_periodic(&self) -> bool {
        matches!(self, Waveform::Sine { .. })
    }

    pub fn min_freq(&self) -> f64 {
        match *self {
            Waveform::Sine { freq_hz } => freq_hz,
            Waveform::Chirp { f_start, f_end } => f_start.min(f_end),
        }
    }

    pub fn max_freq(&self) -> f64 {
        match *self {
            Waveform::Sine { freq_hz } => freq_hz,
            Waveform::Chirp { f_start, f_end } => f_start.max(f_end),
        }
    }
}

/// Probe description, carried in the header of a commanded-signal file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeMeta {
    pub waveform: Waveform,
    pub duration: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub offset: f64,
}

impl ProbeMeta {
    /// Noise-free probe value at `t`; the probe rests at `offset` before
    /// t = 0.
    pub fn value_at(&self, t: f64) -> f64 {
        if t < 0.0 {
            return self.offset;
        }
        let phase = match self.waveform {
            Waveform::Sine { freq_hz } => 2.0 * PI * freq_hz * t,
            Waveform::Chirp { f_start, f_end } => {
                2.0 * PI * (f_start * t + 0.5 * (f_end - f_start) * t * t / self.duration)
            }
        };
        self.offset + self.amplitude * phase.sin()
    }

    /// Instantaneous frequency at `t`.
    pub fn freq_at(&self, t: f64) -> f64 {
        match self.waveform {
            Waveform::Sine { freq_hz } => freq_hz,
            Waveform::Chirp { f_start, f_end } => f_start + (f_end - f_start) * t / self.duration,
        }
    }

    /// Longest period present in the probe.
    pub fn longest_period(&self) -> f64 {
        1.0 / self.waveform.min_freq()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeParams {
    pub waveform: Waveform,
    pub duration: f64,
    pub sample_rate: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ProbeParams {
    pub fn sine(freq_hz: f64, duration: f64, sample_rate: f64) -> Self {
        Self {
            waveform: Waveform::Sine { freq_hz },
            duration,
            sample_rate,
            amplitude: 1.0,
            offset: 0.0,
            noise_std: 0.0,
            seed: 0,
        }
    }

    pub fn chirp(f_start: f64, f_end: f64, duration: f64, sample_rate: f64) -> Self {
        Self {
            waveform: Waveform::Chirp { f_start, f_end },
            ..Self::sine(f_start, duration, sample_rate)
        }
    }

    pub fn with_amplitude(mut self, amplitude: f64, offset: f64) -> Self {
        self.amplitude = amplitude;
        self.offset = offset;
        self
    }

    pub fn with_noise(mut self, noise_std: f64, seed: u64) -> Self {
        self.noise_std = noise_std;
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("probe {name} = {v} must be > 0")))
            }
        };
        positive("duration", self.duration)?;
        positive("sample_rate", self.sample_rate)?;
        positive("min frequency", self.waveform.min_freq())?;
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(Error::InvalidConfig(format!("probe amplitude {}", self.amplitude)));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::InvalidConfig(format!("probe noise {}", self.noise_std)));
        }
        if self.sample_rate < 10.0 * self.waveform.max_freq() {
            return Err(Error::InvalidConfig(format!(
                "sample rate {} Hz is below 10x the highest probe frequency {} Hz",
                self.sample_rate,
                self.waveform.max_freq()
            )));
        }
        Ok(())
    }
}

/// A commanded probe signal and its description.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSignal {
    pub meta: ProbeMeta,
    pub stream: TimedStream<f64>,
}

/// Generates `round(duration * sample_rate)` samples at `k / sample_rate`.
pub fn generate_probe(params: &ProbeParams) -> Result<ProbeSignal> {
    params.validate()?;
    let meta = ProbeMeta {
        waveform: params.waveform,
        duration: params.duration,
        amplitude: params.amplitude,
        offset: params.offset,
    };
    let n = (params.duration * params.sample_rate).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let noise = Normal::new(0.0, params.noise_std).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let samples = (0..n)
        .map(|k| {
            let t = k as f64 / params.sample_rate;
            let mut v = meta.value_at(t);
            if params.noise_std > 0.0 {
                v += noise.sample(&mut rng);
            }
            Sample { t, value: v }
        })
        .collect();
    let stream = TimedStream::new("probe", 0.0, samples)?.with_rate(params.sample_rate)?;
    Ok(ProbeSignal { meta, stream })
}

/// Lag-grid search settings for [`correlate_lag`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagSearch {
    pub min_lag: f64,
    pub max_lag: f64,
    pub resolution: f64,
    /// Minimum measured-signal time span used for the comparison.
    pub min_overlap: f64,
    pub min_score: f64,
    pub parallelism: Parallelism,
}

impl LagSearch {
    pub fn new(max_lag: f64, resolution: f64) -> Self {
        Self {
            min_lag: 0.0,
            max_lag,
            resolution,
            min_overlap: 0.0,
            min_score: MIN_LAG_SCORE,
            parallelism: Parallelism::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.resolution.is_finite() && self.resolution > 0.0) {
            return Err(Error::InvalidConfig(format!("resolution {}", self.resolution)));
        }
        if !(self.min_lag.is_finite() && self.max_lag.is_finite() && self.max_lag >= self.min_lag) {
            return Err(Error::InvalidConfig(format!(
                "lag range [{}, {}]",
                self.min_lag, self.max_lag
            )));
        }
        Ok(())
    }

    pub fn grid_len(&self) -> usize {
        ((self.max_lag - self.min_lag) / self.resolution + 1e-9).floor() as usize + 1
    }

    pub fn grid_lag(&self, i: usize) -> f64 {
        self.min_lag + i as f64 * self.resolution
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagEstimate {
    /// Refined lag in seconds; `measured(t) ≈ reference(t - lag)`.
    pub lag: f64,
    /// Peak normalized correlation.
    pub score: f64,
    /// Best lag on the grid before refinement.
    pub grid_lag: f64,
    pub samples_used: usize,
}

fn pearson(x: &[f64], y_centered: &[f64], y_norm: f64) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (xi, yi) in x.iter().zip(y_centered) {
        let dx = xi - mx;
        sxy += dx * yi;
        sxx += dx * dx;
    }
    if sxx <= 0.0 || y_norm <= 0.0 {
        return 0.0;
    }
    sxy / (sxx.sqrt() * y_norm)
}

/// Finds the lag `L` in `[min_lag, max_lag]` maximizing the normalized
/// correlation between `measured(t)` and `reference(t - L)`.
///
/// The same measured samples are used for every candidate lag: those whose
/// shifted time stays inside the reference span for the whole lag range.
/// The grid peak is refined by a parabola through its two neighbors.
pub fn correlate_lag(
    reference: &TimedStream<f64>,
    measured: &TimedStream<f64>,
    search: &LagSearch,
) -> Result<LagEstimate> {
    search.validate()?;
    let (r0, r1) = reference.span().ok_or(Error::Empty("reference signal"))?;
    measured.span().ok_or(Error::Empty("measured signal"))?;
    let lo = r0 + search.max_lag;
    let hi = r1 + search.min_lag;
    let window: Vec<&Sample<f64>> = measured
        .samples()
        .iter()
        .filter(|s| s.t >= lo - 1e-12 && s.t <= hi + 1e-12)
        .collect();
    let available = match (window.first(), window.last()) {
        (Some(a), Some(b)) => b.t - a.t,
        _ => 0.0,
    };
    if window.len() < 3 || available < search.min_overlap {
        return Err(Error::InsufficientOverlap {
            available,
            required: search.min_overlap,
        });
    }

    let times: Vec<f64> = window.iter().map(|s| s.t).collect();
    let y: Vec<f64> = window.iter().map(|s| s.value).collect();
    let my = y.iter().sum::<f64>() / y.len() as f64;
    let y_centered: Vec<f64> = y.iter().map(|v| v - my).collect();
    let y_norm = y_centered.iter().map(|v| v * v).sum::<f64>().sqrt();

    let n_lags = search.grid_len();
    let scores: Vec<f64> = par::map_range(search.parallelism, n_lags, |i| {
        let lag = search.grid_lag(i);
        let x: Vec<f64> = times
            .iter()
            .map(|&t| {
                let tq = (t - lag).clamp(r0, r1);
                reference.sample_at(tq).unwrap_or(f64::NAN)
            })
            .collect();
        pearson(&x, &y_centered, y_norm)
    });

    let (best, &peak) = scores
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("lag grid is never empty");
    let (offset, score) = if best > 0 && best + 1 < n_lags {
        let (y0, y2) = (scores[best - 1], scores[best + 1]);
        let off = parabolic_offset(y0, peak, y2);
        (off, (peak - 0.25 * (y0 - y2) * off).min(1.0))
    } else {
        (0.0, peak)
    };
    if !(score >= search.min_score) {
        return Err(Error::LowConfidence {
            score,
            threshold: search.min_score,
        });
    }
    let grid_lag = search.grid_lag(best);
    Ok(LagEstimate {
        lag: grid_lag + offset * search.resolution,
        score,
        grid_lag,
        samples_used: times.len(),
    })
}

/// End-to-end lag between a commanded probe and the measured response.
///
/// Requires at least three of the probe's longest periods of overlap after
/// trimming `max_lag`; with a pure sine, `max_lag` must also stay below half
/// a period to avoid aliasing onto the wrong cycle.
pub fn estimate_lag(
    commanded: &ProbeSignal,
    measured: &TimedStream<f64>,
    max_lag: f64,
    resolution: f64,
) -> Result<LagEstimate> {
    estimate_lag_with(commanded, measured, max_lag, resolution, Parallelism::default())
}

pub fn estimate_lag_with(
    commanded: &ProbeSignal,
    measured: &TimedStream<f64>,
    max_lag: f64,
    resolution: f64,
    parallelism: Parallelism,
) -> Result<LagEstimate> {
    let period = commanded.meta.longest_period();
    if commanded.meta.waveform.is_periodic() && max_lag >= period / 2.0 {
        return Err(Error::AliasingRisk {
            max_lag,
            half_period: period / 2.0,
        });
    }
    let search = LagSearch {
        min_overlap: 3.0 * period,
        parallelism,
        ..LagSearch::new(max_lag, resolution)
    };
    correlate_lag(&commanded.stream, measured, &search)
}

/// Per-channel and fused result of [`robot_exec_latency`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotLag {
    pub lag: f64,
    pub score: f64,
    /// `(axis, estimate)` for every translation axis that carried signal.
    pub channels: Vec<(char, LagEstimate)>,
}

/// End-to-end lag between desired and measured end-effector trajectories.
///
/// Each translation axis with motion is aligned on its own; the results are
/// fused by a correlation-weighted average. Axes that disagree by more than
/// two grid steps make the estimate ambiguous. Rotation is not used.
pub fn robot_exec_latency(
    desired: &PoseTrajectory,
    measured: &PoseTrajectory,
    max_lag: f64,
    resolution: f64,
) -> Result<RobotLag> {
    let search = LagSearch {
        min_overlap: 3.0 * max_lag,
        ..LagSearch::new(max_lag, resolution)
    };
    robot_exec_latency_with(desired, measured, &search)
}

pub fn robot_exec_latency_with(
    desired: &PoseTrajectory,
    measured: &PoseTrajectory,
    search: &LagSearch,
) -> Result<RobotLag> {
    let channel = |traj: &PoseTrajectory, axis: usize| -> Result<TimedStream<f64>> {
        TimedStream::from_parts(
            format!("axis{axis}"),
            0.0,
            &traj.times(),
            traj.samples().iter().map(|s| s.pose.translation()[axis]).collect(),
        )
    };
    let mut channels = Vec::new();
    let mut first_err = None;
    for (axis, name) in ['x', 'y', 'z'].into_iter().enumerate() {
        let d = channel(desired, axis)?;
        let values: Vec<f64> = d.samples().iter().map(|s| s.value).collect();
        let m = crate::stats::mean(&values).unwrap_or(0.0);
        let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len().max(1) as f64;
        if var.sqrt() < 1e-9 {
            continue;
        }
        match correlate_lag(&d, &channel(measured, axis)?, search) {
            Ok(est) => channels.push((name, est)),
            Err(e @ Error::LowConfidence { .. }) => {
                first_err.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    if channels.is_empty() {
        return Err(first_err.unwrap_or(Error::Degenerate("desired trajectory does not move".into())));
    }
    let lo = channels.iter().map(|c| c.1.lag).fold(f64::INFINITY, f64::min);
    let hi = channels.iter().map(|c| c.1.lag).fold(f64::NEG_INFINITY, f64::max);
    let allowed = 2.0 * search.resolution;
    if hi - lo > allowed {
        return Err(Error::AmbiguousLag {
            spread: hi - lo,
            allowed,
        });
    }
    let wsum: f64 = channels.iter().map(|c| c.1.score).sum();
    let lag = channels.iter().map(|c| c.1.score * c.1.lag).sum::<f64>() / wsum;
    let score = channels.iter().map(|c| c.1.score).fold(f64::INFINITY, f64::min);
    Ok(RobotLag { lag, score, channels })
}
