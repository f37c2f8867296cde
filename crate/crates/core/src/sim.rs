//! Deterministic closed-loop simulation of the deployment loop.
//!
//! A 60 Hz camera observes the world with the true camera latency. A replay
//! policy, standing in for a perfectly trained policy, answers each
//! down-sampled frame with the demonstrated continuation of the reference
//! after `inference_delay`. The scheduler trims and dispatches the chunk using
//! the *assumed* latency profile, and each actuator applies its commands after
//! its *true* execution latency through a first-order lag. Comparing the
//! achieved motion to the reference shows what latency matching buys.
//!
//! Time advances in fixed 1 ms ticks; the only randomness is the optional
//! inference jitter, drawn from a seeded generator.

use std::io::Write;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::latency::LatencyProfile;
use crate::par::{self, Parallelism};
use crate::schedule::{
    plan_dispatch, to_absolute_targets, trim_outdated, ActionChunk, ActionStep, Actuator, Command, DispatchPlan,
    Dispatcher,
};
use crate::se3::{Pose, PoseTrajectory, TimedPose};
use crate::stats::parabolic_offset;
use crate::stream::{Sample, TimedStream};
use crate::{Error, Result, TIME_EPS};

/// Simulation tick in seconds.
pub const TICK: f64 = 0.001;

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.81;

/// Largest lag considered by the misalignment metric.
const MAX_LAG: f64 = 0.5;

fn default_chunk_steps() -> usize {
    6
}

fn default_camera_rate() -> f64 {
    60.0
}

fn default_tau() -> f64 {
    0.03
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// True hardware latencies.
    pub profile: LatencyProfile,
    /// Latencies the scheduler believes in. Zeros disable latency matching.
    pub assumed_profile: LatencyProfile,
    /// Policy rate in Hz.
    pub freq: f64,
    pub inference_delay: f64,
    /// Extra inference delay drawn uniformly from `[0, inference_jitter]`.
    #[serde(default)]
    pub inference_jitter: f64,
    /// First-order time constant of both actuators.
    #[serde(default = "default_tau")]
    pub tracker_tau: f64,
    #[serde(default)]
    pub seed: u64,
    /// Steps per predicted chunk.
    #[serde(default = "default_chunk_steps")]
    pub chunk_steps: usize,
    #[serde(default = "default_camera_rate")]
    pub camera_rate: f64,
}

impl SimConfig {
    /// Scheduler knows the true latencies.
    pub fn matched(profile: LatencyProfile, freq: f64) -> Self {
        Self {
            profile,
            assumed_profile: profile,
            freq,
            inference_delay: 0.01,
            inference_jitter: 0.0,
            tracker_tau: default_tau(),
            seed: 0,
            chunk_steps: default_chunk_steps(),
            camera_rate: default_camera_rate(),
        }
    }

    /// Scheduler assumes every latency is zero.
    pub fn ablated(profile: LatencyProfile, freq: f64) -> Self {
        Self {
            assumed_profile: LatencyProfile::zeros(),
            ..Self::matched(profile, freq)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        self.assumed_profile.validate()?;
        if !(self.tracker_tau.is_finite() && self.tracker_tau > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "unstable tracker: tau {} must be > 0",
                self.tracker_tau
            )));
        }
        if !(self.freq.is_finite() && self.freq > 0.0 && self.freq <= self.camera_rate) {
            return Err(Error::InvalidConfig(format!(
                "freq {} must be in (0, camera_rate {}]",
                self.freq, self.camera_rate
            )));
        }
        for (name, v) in [
            ("inference_delay", self.inference_delay),
            ("inference_jitter", self.inference_jitter),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} {v} must be >= 0")));
            }
        }
        if self.chunk_steps == 0 {
            return Err(Error::InvalidConfig("chunk_steps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Accelerate-and-release throw along a straight line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TossParams {
    pub start: [f64; 3],
    /// Elevation of the throw direction above the horizontal, degrees.
    pub elevation_deg: f64,
    pub travel: f64,
    pub peak_speed: f64,
    pub t_start: f64,
    pub duration: f64,
    pub width_closed: f64,
    pub width_open: f64,
    pub sample_rate: f64,
}

impl Default for TossParams {
    fn default() -> Self {
        Self {
            start: [0.3, 0.0, 0.2],
            elevation_deg: 30.0,
            travel: 0.8,
            peak_speed: 2.0,
            t_start: 1.6,
            duration: 4.0,
            width_closed: 0.02,
            width_open: 0.08,
            sample_rate: 1000.0,
        }
    }
}

impl TossParams {
    pub fn direction(&self) -> Vector3<f64> {
        let e = self.elevation_deg.to_radians();
        Vector3::new(e.cos(), 0.0, e.sin())
    }

    /// Length of the cosine velocity bump that covers `travel`.
    pub fn motion_time(&self) -> f64 {
        2.0 * self.travel / self.peak_speed
    }

    /// Release happens at peak speed, halfway through the motion.
    pub fn release_time(&self) -> f64 {
        self.t_start + 0.5 * self.motion_time()
    }

    /// Distance along the throw direction at time `t`.
    pub fn progress(&self, t: f64) -> f64 {
        let m = self.motion_time();
        let tau = (t - self.t_start).clamp(0.0, m);
        let w = 2.0 * std::f64::consts::PI / m;
        0.5 * self.peak_speed * (tau - (w * tau).sin() / w)
    }

    pub fn speed(&self, t: f64) -> f64 {
        let m = self.motion_time();
        let tau = t - self.t_start;
        if !(0.0..=m).contains(&tau) {
            return 0.0;
        }
        0.5 * self.peak_speed * (1.0 - (2.0 * std::f64::consts::PI * tau / m).cos())
    }

    /// Position and velocity at release.
    pub fn release_state(&self) -> (Vector3<f64>, Vector3<f64>) {
        let tr = self.release_time();
        let d = self.direction();
        (
            Vector3::from(self.start) + d * self.progress(tr),
            d * self.speed(tr),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.travel > 0.0
            && self.peak_speed > 0.0
            && self.t_start >= 0.0
            && self.sample_rate > 0.0
            && self.t_start + self.motion_time() <= self.duration
            && 0.0 <= self.width_closed
            && self.width_closed < self.width_open
            && self.width_open <= crate::GRIPPER_STROKE;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid toss parameters: {self:?}")))
        }
    }
}

/// Reference motion: end-effector trajectory plus a gripper width profile
/// with one release (upward threshold crossing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub trajectory: PoseTrajectory,
    /// Held constant between samples.
    pub widths: TimedStream<f64>,
    pub release_threshold: f64,
}

impl Reference {
    pub fn duration(&self) -> f64 {
        match (self.trajectory.first(), self.trajectory.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    fn start(&self) -> f64 {
        self.trajectory.first().map_or(0.0, |s| s.t)
    }

    /// Pose at `t`, held at the ends.
    pub fn pose_at(&self, t: f64) -> Pose {
        let s = self.trajectory.samples();
        let i = s.partition_point(|p| p.t <= t);
        if i == 0 {
            return s[0].pose;
        }
        if i == s.len() {
            return s[i - 1].pose;
        }
        let (a, b) = (&s[i - 1], &s[i]);
        a.pose.interpolate_unchecked(&b.pose, (t - a.t) / (b.t - a.t))
    }

    /// Width at `t` (zero-order hold).
    pub fn width_at(&self, t: f64) -> f64 {
        let s = self.widths.samples();
        let i = s.partition_point(|w| w.t <= t + TIME_EPS);
        s[i.saturating_sub(1)].value
    }

    /// Time of the single upward crossing of `release_threshold`.
    pub fn release_time(&self) -> Result<f64> {
        let s = self.widths.samples();
        let ups: Vec<f64> = s
            .windows(2)
            .filter(|w| w[0].value < self.release_threshold && w[1].value >= self.release_threshold)
            .map(|w| w[1].t)
            .collect();
        match ups.as_slice() {
            [t] => Ok(*t),
            _ => Err(Error::InvalidValue(format!(
                "reference needs exactly one release event, found {}",
                ups.len()
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.duration() < 3.0 {
            return Err(Error::InvalidValue(format!(
                "reference covers {} s, need at least 3 s",
                self.duration()
            )));
        }
        if self.widths.is_empty() {
            return Err(Error::Empty("width profile"));
        }
        self.release_time().map(|_| ())
    }
}

/// Analytic throw: hold, cosine velocity bump along `direction()`, release
/// at peak speed, hold.
pub fn toss_profile(p: &TossParams) -> Result<Reference> {
    p.validate()?;
    let n = (p.duration * p.sample_rate).round() as usize + 1;
    let d = p.direction();
    let start = Vector3::from(p.start);
    let tr = p.release_time();
    let mut poses = Vec::with_capacity(n);
    let mut widths = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / p.sample_rate;
        poses.push(TimedPose {
            t,
            pose: Pose::from_translation(0.0, 0.0, 0.0).with_translation(start + d * p.progress(t)),
        });
        let w = if t >= tr - TIME_EPS { p.width_open } else { p.width_closed };
        widths.push(Sample { t, value: w });
    }
    Ok(Reference {
        trajectory: PoseTrajectory::new("world", poses)?,
        widths: TimedStream::new("width", 0.0, widths)?,
        release_threshold: 0.5 * (p.width_closed + p.width_open),
    })
}

/// Where a point released at `pos` with velocity `vel` comes down to height
/// `z_land` under gravity `g`.
pub fn landing_point(pos: Vector3<f64>, vel: Vector3<f64>, z_land: f64, g: f64) -> Result<Vector3<f64>> {
    // z(t) = z0 + vz t - g t^2 / 2 = z_land, later root.
    let (a, b, c) = (0.5 * g, -vel.z, z_land - pos.z);
    let disc = b * b - 4.0 * a * c;
    if !(g > 0.0) || disc < 0.0 {
        return Err(Error::InvalidValue("trajectory never reaches the landing height".into()));
    }
    let t = (-b + disc.sqrt()) / (2.0 * a);
    if t < 0.0 {
        return Err(Error::InvalidValue("landing height is above the whole flight".into()));
    }
    Ok(Vector3::new(pos.x + vel.x * t, pos.y + vel.y * t, z_land))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SimReport {
    /// Absolute value of `lag`.
    pub temporal_misalignment: f64,
    /// Shift of the effective robot set-point relative to the reference;
    /// positive means late.
    pub lag: f64,
    /// RMS distance between achieved and reference positions.
    pub tracking_rmse: f64,
    /// Gap between the achieved gripper crossing its release threshold and
    /// the achieved robot passing the reference release point.
    pub release_time_error: f64,
    /// Same gap measured on the effective set-points (before the lag
    /// stage).
    pub release_setpoint_skew: f64,
    /// Mean jerk magnitude of the achieved motion, m/s³.
    pub jerk_metric: f64,
    pub chunks: usize,
    pub empty_chunks: usize,
    pub preempted: usize,
    pub commands_sent: usize,
}

/// Per-tick signals of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub t: Vec<f64>,
    pub reference: Vec<Vector3<f64>>,
    /// Robot set-point after the execution delay.
    pub setpoint: Vec<Vector3<f64>>,
    pub output: Vec<Vector3<f64>>,
    pub width_setpoint: Vec<f64>,
    pub width_output: Vec<f64>,
}

/// Set-point generator fed by dispatched commands, keyed by send time.
#[derive(Debug, Clone)]
struct Controller<T> {
    waypoints: Vec<(f64, T)>,
    linear: bool,
}

impl<T: Copy + Lerp> Controller<T> {
    fn new(initial: T, linear: bool) -> Self {
        Self {
            waypoints: vec![(0.0, initial)],
            linear,
        }
    }

    fn value(&self, t: f64) -> T {
        let w = &self.waypoints;
        let i = w.partition_point(|p| p.0 <= t + TIME_EPS);
        if i == 0 {
            return w[0].1;
        }
        if i == w.len() || !self.linear {
            return w[i - 1].1;
        }
        let (a, b) = (&w[i - 1], &w[i]);
        T::lerp(&a.1, &b.1, (t - a.0) / (b.0 - a.0))
    }

    /// Replaces queued waypoints at or after the new first send time. When
    /// nothing queued remains ahead of `now`, the current set-point is
    /// pinned at `now` so the new commands start from it.
    fn submit(&mut self, new: &[(f64, T)], now: f64) {
        let Some(&(s0, _)) = new.first() else { return };
        let cur = self.value(now);
        self.waypoints.retain(|p| p.0 < s0 - TIME_EPS);
        if self.waypoints.last().is_none_or(|p| p.0 < now) && s0 > now + TIME_EPS {
            self.waypoints.push((now, cur));
        }
        self.waypoints.extend_from_slice(new);
        // Drop history that can no longer influence `value(t >= now)`.
        let keep_from = self.waypoints.partition_point(|p| p.0 <= now).saturating_sub(1);
        self.waypoints.drain(..keep_from);
    }
}

trait Lerp {
    fn lerp(a: &Self, b: &Self, alpha: f64) -> Self;
}

impl Lerp for Vector3<f64> {
    fn lerp(a: &Self, b: &Self, alpha: f64) -> Self {
        a + (b - a) * alpha
    }
}

impl Lerp for f64 {
    fn lerp(a: &Self, b: &Self, alpha: f64) -> Self {
        a + (b - a) * alpha
    }
}

fn ticks(seconds: f64) -> usize {
    (seconds / TICK).round() as usize
}

/// Runs the loop and returns the report plus the per-tick trace.
pub fn simulate_traced(reference: &Reference, cfg: &SimConfig) -> Result<(SimReport, Trace)> {
    cfg.validate()?;
    reference.validate()?;
    let t0 = reference.start();
    let n = ticks(reference.duration());
    let true_p = cfg.profile;
    let assumed = cfg.assumed_profile;
    let dt_out = 1.0 / cfg.freq;
    let alpha = 1.0 - (-TICK / cfg.tracker_tau).exp();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let p_ref = |t: f64| *reference.pose_at(t0 + t).translation();
    let w_ref = |t: f64| reference.width_at(t0 + t);

    let mut robot = Controller::new(p_ref(0.0), true);
    let mut gripper = Controller::new(w_ref(0.0), false);
    let mut dispatcher = Dispatcher::new();
    let (delay_r, delay_g) = (ticks(true_p.l_robot_exec), ticks(true_p.l_gripper_exec));

    let mut report = SimReport::default();
    let mut tr = Trace::default();
    let mut u_r_hist: Vec<Vector3<f64>> = Vec::with_capacity(n + 1);
    let mut u_g_hist: Vec<f64> = Vec::with_capacity(n + 1);
    let mut x_r = p_ref(0.0);
    let mut x_g = w_ref(0.0);

    let mut next_frame = 0usize;
    let mut last_kept: Option<f64> = None;
    // (output time, capture time, receive time), ordered by output time.
    let mut pending: Vec<(f64, f64, f64)> = Vec::new();

    for k in 0..=n {
        let t = k as f64 * TICK;

        // Camera frames arriving by now.
        loop {
            let c = next_frame as f64 / cfg.camera_rate;
            if c > reference.duration() + TIME_EPS || c + true_p.l_camera > t + TIME_EPS {
                break;
            }
            next_frame += 1;
            let keep = last_kept.is_none_or(|l| c >= l + dt_out - 0.5 / cfg.camera_rate);
            if !keep {
                continue;
            }
            last_kept = Some(c);
            let jitter = if cfg.inference_jitter > 0.0 {
                rng.random_range(0.0..=cfg.inference_jitter)
            } else {
                0.0
            };
            let t_out = t + cfg.inference_delay + jitter;
            let at = pending.partition_point(|p| p.0 <= t_out);
            pending.insert(at, (t_out, c, t));
        }

        // Policy outputs due now.
        while pending.first().is_some_and(|p| p.0 <= t + TIME_EPS) {
            let (_, c, t_recv) = pending.remove(0);
            report.chunks += 1;
            let t_obs = t_recv - assumed.l_camera;
            // Proprioception the policy saw, read from the achieved history.
            let obs_tick = ((t_obs + assumed.l_proprio - true_p.l_proprio) / TICK)
                .round()
                .clamp(0.0, (tr.output.len().max(1) - 1) as f64) as usize;
            let ee_obs = Pose::identity().with_translation(tr.output.get(obs_tick).copied().unwrap_or(x_r));
            let inv = ee_obs.inverse();
            let steps: Vec<ActionStep> = (0..cfg.chunk_steps)
                .map(|j| {
                    let demo_t = c + j as f64 * dt_out;
                    ActionStep {
                        t_target: t_obs + j as f64 * dt_out,
                        rel_pose: inv.compose(&Pose::identity().with_translation(p_ref(demo_t))),
                        width: w_ref(demo_t),
                    }
                })
                .collect();
            let chunk = ActionChunk::new(t_obs, steps, dt_out)?;
            let trimmed = match trim_outdated(&chunk, t, &assumed) {
                Ok(x) => x,
                Err(Error::EmptyChunk { .. }) => {
                    report.empty_chunks += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let plan = plan_dispatch(&to_absolute_targets(&trimmed.chunk, &ee_obs), &assumed, t)?;
            report.preempted += dispatcher.submit(&plan).1;
            feed(&plan, &mut robot, &mut gripper, t);
        }

        report.commands_sent += dispatcher.pop_due(t).len();

        u_r_hist.push(robot.value(t));
        u_g_hist.push(gripper.value(t));
        let y_r = u_r_hist[k.saturating_sub(delay_r)];
        let y_g = u_g_hist[k.saturating_sub(delay_g)];
        x_r += (y_r - x_r) * alpha;
        x_g += (y_g - x_g) * alpha;

        tr.t.push(t);
        tr.reference.push(p_ref(t));
        tr.setpoint.push(y_r);
        tr.output.push(x_r);
        tr.width_setpoint.push(y_g);
        tr.width_output.push(x_g);
    }

    report.lag = best_lag(&tr.reference, &tr.setpoint);
    report.temporal_misalignment = report.lag.abs();
    report.tracking_rmse = {
        let s: f64 = tr.reference.iter().zip(&tr.output).map(|(a, b)| (a - b).norm_squared()).sum();
        (s / tr.t.len() as f64).sqrt()
    };
    let release = reference.release_time()? - t0;
    let release_pos = p_ref(release);
    let dir = {
        let d = p_ref(release + 0.01) - p_ref(release - 0.01);
        if d.norm() > 0.0 {
            d.normalize()
        } else {
            Vector3::x()
        }
    };
    let thr = reference.release_threshold;
    let progress = |v: &[Vector3<f64>]| -> Vec<f64> { v.iter().map(|p| (p - release_pos).dot(&dir)).collect() };
    let cross = |sig: &[f64], level: f64| crossing_time(&tr.t, sig, level);
    report.release_time_error = match (cross(&progress(&tr.output), 0.0), cross(&tr.width_output, thr)) {
        (Some(a), Some(b)) => (a - b).abs(),
        _ => f64::INFINITY,
    };
    report.release_setpoint_skew = match (cross(&progress(&tr.setpoint), 0.0), cross(&tr.width_setpoint, thr)) {
        (Some(a), Some(b)) => (a - b).abs(),
        _ => f64::INFINITY,
    };
    report.jerk_metric = jerk(&tr.output, 10);
    Ok((report, tr))
}

fn feed(plan: &DispatchPlan, robot: &mut Controller<Vector3<f64>>, gripper: &mut Controller<f64>, now: f64) {
    let r: Vec<(f64, Vector3<f64>)> = plan
        .for_actuator(Actuator::Robot)
        .filter_map(|e| match e.command {
            Command::Pose(p) => Some((e.t_send, *p.translation())),
            Command::Width(_) => None,
        })
        .collect();
    let g: Vec<(f64, f64)> = plan
        .for_actuator(Actuator::Gripper)
        .filter_map(|e| match e.command {
            Command::Width(w) => Some((e.t_send, w)),
            Command::Pose(_) => None,
        })
        .collect();
    robot.submit(&r, now);
    gripper.submit(&g, now);
}

pub fn simulate(reference: &Reference, cfg: &SimConfig) -> Result<SimReport> {
    simulate_traced(reference, cfg).map(|r| r.0)
}

/// Shift `L` in `[-MAX_LAG, MAX_LAG]` minimizing the RMS distance between
/// `reference(t)` and `signal(t + L)`, refined to sub-tick precision.
fn best_lag(reference: &[Vector3<f64>], signal: &[Vector3<f64>]) -> f64 {
    let m = ticks(MAX_LAG);
    let n = reference.len();
    if n <= 2 * m + 1 {
        return 0.0;
    }
    let cost: Vec<f64> = (0..=2 * m)
        .map(|j| {
            let shift = j as isize - m as isize;
            (m..n - m)
                .map(|i| (reference[i] - signal[(i as isize + shift) as usize]).norm_squared())
                .sum::<f64>()
        })
        .collect();
    let (best, _) = cost
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty lag grid");
    let off = if best > 0 && best < 2 * m {
        parabolic_offset(cost[best - 1], cost[best], cost[best + 1])
    } else {
        0.0
    };
    (best as f64 - m as f64 + off) * TICK
}

/// First upward crossing of `level`, linearly interpolated between ticks.
fn crossing_time(t: &[f64], sig: &[f64], level: f64) -> Option<f64> {
    (1..sig.len()).find_map(|i| {
        let (a, b) = (sig[i - 1], sig[i]);
        (a < level && b >= level).then(|| t[i - 1] + (t[i] - t[i - 1]) * (level - a) / (b - a))
    })
}

/// Mean third-difference magnitude of `x` resampled every `stride` ticks.
fn jerk(x: &[Vector3<f64>], stride: usize) -> f64 {
    let s: Vec<&Vector3<f64>> = x.iter().step_by(stride).collect();
    if s.len() < 4 {
        return 0.0;
    }
    let h = stride as f64 * TICK;
    let total: f64 = s
        .windows(4)
        .map(|w| ((w[3] - w[2] * 3.0 + w[1] * 3.0 - w[0]) / (h * h * h)).norm())
        .sum();
    total / (s.len() - 3) as f64
}

/// One row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(flatten)]
    pub config: SimConfig,
    #[serde(default)]
    pub toss: TossParams,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub name: String,
    pub config: SimConfig,
    pub report: SimReport,
}

pub fn run_scenario(s: &Scenario) -> Result<SimReport> {
    simulate(&toss_profile(&s.toss)?, &s.config)
}

/// Runs every scenario; rows keep input order.
pub fn sweep(scenarios: &[Scenario], parallelism: Parallelism) -> Result<Vec<SweepRow>> {
    let reports = par::try_map(parallelism, scenarios, run_scenario)?;
    Ok(scenarios
        .iter()
        .zip(reports)
        .map(|(s, report)| SweepRow {
            name: s.name.clone(),
            config: s.config.clone(),
            report,
        })
        .collect())
}

const CSV_HEADER: [&str; 20] = [
    "name",
    "freq",
    "l_camera",
    "l_proprio",
    "l_gripper_exec",
    "l_robot_exec",
    "assumed_l_camera",
    "assumed_l_proprio",
    "assumed_l_gripper_exec",
    "assumed_l_robot_exec",
    "inference_delay",
    "tracker_tau",
    "seed",
    "temporal_misalignment",
    "lag",
    "tracking_rmse",
    "release_time_error",
    "release_setpoint_skew",
    "jerk_metric",
    "empty_chunks",
];

/// Writes a header line followed by one line per row.
pub fn write_csv(rows: &[SweepRow], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in rows {
        let c = &r.config;
        let (p, a, m) = (&c.profile, &c.assumed_profile, &r.report);
        let nums = [
            c.freq,
            p.l_camera,
            p.l_proprio,
            p.l_gripper_exec,
            p.l_robot_exec,
            a.l_camera,
            a.l_proprio,
            a.l_gripper_exec,
            a.l_robot_exec,
            c.inference_delay,
            c.tracker_tau,
        ];
        let mut rec: Vec<String> = vec![r.name.clone()];
        rec.extend(nums.iter().map(|v| v.to_string()));
        rec.push(c.seed.to_string());
        rec.extend(
            [
                m.temporal_misalignment,
                m.lag,
                m.tracking_rmse,
                m.release_time_error,
                m.release_setpoint_skew,
                m.jerk_metric,
            ]
            .iter()
            .map(|v| v.to_string()),
        );
        rec.push(m.empty_chunks.to_string());
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}
