//! Latency-aware alignment of observation streams.
//!
//! Every stream is moved to capture time (`receive - latency`) before it is
//! sampled. The camera, normally the slowest stream, is down-sampled to the
//! policy rate and each kept frame's capture time becomes the anchor `t_obs`
//! at which the proprioception streams are interpolated. Tuples that would
//! need extrapolation are skipped, never clamped.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::se3::{Pose, PoseTrajectory, TimedPose};
use crate::stream::TimedStream;
use crate::{Error, Result};

/// Opaque reference to a camera frame.
pub type FrameRef = String;

/// Largest pairing offset for bimanual soft synchronization: one frame at
/// 60 Hz.
pub const SOFT_SYNC_MAX_OFFSET: f64 = 1.0 / 60.0;

/// Keeps a subset of frames spaced as close as possible to `1 / target_hz`.
///
/// Selection is greedy: starting from the first frame, the next kept frame is
/// the one nearest to `previous + 1 / target_hz`, so every spacing error is
/// bounded by half a native frame period (for a regular input stream).
pub fn downsample_frames<T: Clone>(frames: &TimedStream<T>, target_hz: f64) -> Result<TimedStream<T>> {
    if !(target_hz.is_finite() && target_hz > 0.0) {
        return Err(Error::InvalidConfig(format!("target rate {target_hz} Hz")));
    }
    if frames.is_empty() {
        return Ok(frames.clone());
    }
    let native = frames.native_rate().unwrap_or(f64::INFINITY);
    if target_hz > native * (1.0 + 1e-6) {
        return Err(Error::RateTooHigh {
            target: target_hz,
            native,
        });
    }
    let period = 1.0 / target_hz;
    let times: Vec<f64> = frames.times().collect();
    let mut keep = vec![0usize];
    let mut last = 0usize;
    loop {
        let goal = times[last] + period;
        // Nearest frame to `goal` strictly after `last`.
        let i = times.partition_point(|&t| t < goal);
        let cand = match (i.checked_sub(1).filter(|&j| j > last), (i < times.len()).then_some(i)) {
            (Some(a), Some(b)) => {
                if times[b] - goal < goal - times[a] {
                    b
                } else {
                    a
                }
            }
            (Some(a), None) => {
                // Past the end: only accept if it is the grid point itself.
                if goal - times[a] <= 0.5 / native {
                    a
                } else {
                    break;
                }
            }
            (None, Some(b)) => b,
            (None, None) => break,
        };
        keep.push(cand);
        last = cand;
    }
    frames.select(&keep).with_rate(target_hz)
}

/// One synchronized observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationTuple {
    /// Capture time of the anchoring frame.
    pub t_obs: f64,
    pub frame_ref: FrameRef,
    /// End-effector history relative to the pose at `t_obs` (last element is
    /// the identity), oldest first.
    pub ee_history: PoseTrajectory,
    /// `(capture time, width)` pairs, oldest first.
    pub width_history: Vec<(f64, f64)>,
    /// Absolute end-effector pose at `t_obs` (the anchor for relative
    /// actions).
    pub ee_anchor: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedTuple {
    /// Index into the down-sampled frame stream.
    pub frame_index: usize,
    pub t_obs: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Alignment {
    pub tuples: Vec<ObservationTuple>,
    pub skipped: Vec<SkippedTuple>,
    /// Number of frames after down-sampling; always
    /// `tuples.len() + skipped.len()`.
    pub frames_considered: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig {
    /// Number of history steps for the proprioception streams.
    pub obs_horizon: usize,
    /// Policy rate in Hz.
    pub freq: f64,
}

/// Builds observation tuples anchored at the capture times of down-sampled
/// frames. Each stream uses its own declared latency.
pub fn align_observations(
    frames: &TimedStream<FrameRef>,
    ee: &TimedStream<Pose>,
    width: &TimedStream<f64>,
    cfg: &AlignConfig,
) -> Result<Alignment> {
    if cfg.obs_horizon == 0 {
        return Err(Error::InvalidConfig("obs_horizon must be >= 1".into()));
    }
    for (id, l) in [(ee.stream_id(), ee.latency()), (width.stream_id(), width.latency())] {
        if l > frames.latency() {
            return Err(Error::CameraNotSlowest {
                stream: id.to_string(),
                latency: l,
                camera: frames.latency(),
            });
        }
    }
    let kept = downsample_frames(frames, cfg.freq)?;
    let dt = 1.0 / cfg.freq;
    let mut out = Alignment {
        frames_considered: kept.len(),
        ..Default::default()
    };
    for (frame_index, f) in kept.samples().iter().enumerate() {
        let t_obs = f.t - kept.latency();
        let times: Vec<f64> = (0..cfg.obs_horizon)
            .rev()
            .map(|k| t_obs - k as f64 * dt)
            .collect();
        let sampled = times
            .iter()
            .map(|&t| {
                let pose = ee.sample_at_capture(t).map_err(|e| format!("{}: {e}", ee.stream_id()))?;
                let w = width
                    .sample_at_capture(t)
                    .map_err(|e| format!("{}: {e}", width.stream_id()))?;
                Ok::<_, String>((pose, w))
            })
            .collect::<std::result::Result<Vec<_>, _>>();
        match sampled {
            Ok(values) => {
                let traj = PoseTrajectory::new(
                    ee.stream_id(),
                    times
                        .iter()
                        .zip(&values)
                        .map(|(&t, (pose, _))| TimedPose { t, pose: *pose })
                        .collect(),
                )?;
                let ee_anchor = values.last().expect("obs_horizon >= 1").0;
                out.tuples.push(ObservationTuple {
                    t_obs,
                    frame_ref: f.value.clone(),
                    ee_history: traj.relative_proprioception()?,
                    width_history: times.iter().zip(&values).map(|(&t, v)| (t, v.1)).collect(),
                    ee_anchor,
                });
            }
            Err(reason) => {
                debug!("skipping frame {frame_index} at t_obs={t_obs}: {reason}");
                out.skipped.push(SkippedTuple {
                    frame_index,
                    t_obs,
                    reason,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramePair {
    pub left_index: usize,
    pub right_index: usize,
    pub left: FrameRef,
    pub right: FrameRef,
    /// `t_right - t_left`.
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SoftSync {
    pub pairs: Vec<FramePair>,
    /// Mutually nearest pairs whose offset exceeds the threshold.
    pub rejected: Vec<FramePair>,
    pub unmatched_left: Vec<usize>,
    pub unmatched_right: Vec<usize>,
}

/// Pairs frames of two cameras on a shared clock by mutual nearest
/// timestamp. Pairs further apart than `max_offset` are rejected.
pub fn soft_sync_bimanual(
    left: &TimedStream<FrameRef>,
    right: &TimedStream<FrameRef>,
    max_offset: f64,
) -> Result<SoftSync> {
    if left.is_empty() {
        return Err(Error::Empty("left frame stream"));
    }
    if right.is_empty() {
        return Err(Error::Empty("right frame stream"));
    }
    let lt: Vec<f64> = left.times().collect();
    let rt: Vec<f64> = right.times().collect();
    let mut out = SoftSync::default();
    let mut right_used = vec![false; rt.len()];
    for (i, &t) in lt.iter().enumerate() {
        let j = right.nearest_index(t).expect("non-empty");
        if left.nearest_index(rt[j]) != Some(i) {
            out.unmatched_left.push(i);
            continue;
        }
        right_used[j] = true;
        let pair = FramePair {
            left_index: i,
            right_index: j,
            left: left.samples()[i].value.clone(),
            right: right.samples()[j].value.clone(),
            offset: rt[j] - t,
        };
        if pair.offset.abs() <= max_offset + 1e-12 {
            out.pairs.push(pair);
        } else {
            out.rejected.push(pair);
        }
    }
    out.unmatched_right = right_used
        .iter()
        .enumerate()
        .filter(|(_, used)| !**used)
        .map(|(j, _)| j)
        .collect();
    Ok(out)
}
