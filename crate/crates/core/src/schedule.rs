//! Inference-time action latency matching.
//!
//! A policy predicts a chunk of actions anchored at the capture time of its
//! last observation, `t_obs`. By the time the chunk is available
//! (`t_output`) its first steps are already outdated. [`trim_outdated`]
//! drops every step that can no longer take effect, [`plan_dispatch`] sends
//! the remaining commands ahead of time by each actuator's execution
//! latency, and [`Dispatcher`] keeps the single timeline of pending commands
//! across overlapping chunks.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::latency::LatencyProfile;
use crate::se3::Pose;
use crate::{Error, Result, GRIPPER_STROKE, TIME_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionStep {
    pub t_target: f64,
    /// End-effector pose relative to the pose at `t_obs`.
    pub rel_pose: Pose,
    /// Gripper width in meters.
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionChunk {
    pub t_obs: f64,
    pub steps: Vec<ActionStep>,
    /// Step spacing of the demonstrations the policy was trained on.
    pub dt_output: f64,
}

impl ActionChunk {
    pub fn new(t_obs: f64, steps: Vec<ActionStep>, dt_output: f64) -> Result<Self> {
        let c = Self {
            t_obs,
            steps,
            dt_output,
        };
        c.validate()?;
        Ok(c)
    }

    /// Steps at `t_obs + k * dt_output`, `k = 0..n`.
    pub fn uniform(t_obs: f64, dt_output: f64, poses: &[Pose], widths: &[f64]) -> Result<Self> {
        if poses.len() != widths.len() {
            return Err(Error::InvalidValue("pose/width length mismatch".into()));
        }
        let steps = poses
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(k, (&rel_pose, &width))| ActionStep {
                t_target: t_obs + k as f64 * dt_output,
                rel_pose,
                width,
            })
            .collect();
        Self::new(t_obs, steps, dt_output)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t_obs.is_finite() {
            return Err(Error::InvalidValue("t_obs must be finite".into()));
        }
        if !(self.dt_output.is_finite() && self.dt_output > 0.0) {
            return Err(Error::InvalidValue(format!("dt_output {}", self.dt_output)));
        }
        crate::se3::check_times(self.steps.iter().map(|s| s.t_target))?;
        if let Some(first) = self.steps.first() {
            if first.t_target < self.t_obs - TIME_EPS {
                return Err(Error::InvalidValue(format!(
                    "first target {} precedes t_obs {}",
                    first.t_target, self.t_obs
                )));
            }
        }
        if let Some(s) = self
            .steps
            .iter()
            .find(|s| !(0.0..=GRIPPER_STROKE).contains(&s.width))
        {
            return Err(Error::InvalidValue(format!(
                "width {} outside gripper stroke [0, {GRIPPER_STROKE}]",
                s.width
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trimmed {
    pub chunk: ActionChunk,
    pub discarded: usize,
    /// Earliest time at which a command can still take effect.
    pub t_act: f64,
}

/// Drops steps targeted before `t_act = t_output + max(robot, gripper
/// execution latency)`.
pub fn trim_outdated(chunk: &ActionChunk, t_output: f64, profile: &LatencyProfile) -> Result<Trimmed> {
    trim_with_latency(chunk, t_output, profile.max_exec())
}

/// [`trim_outdated`] with an explicit execution latency.
pub fn trim_with_latency(chunk: &ActionChunk, t_output: f64, exec_latency: f64) -> Result<Trimmed> {
    if t_output < chunk.t_obs - TIME_EPS {
        return Err(Error::InvalidValue(format!(
            "t_output {t_output} precedes t_obs {}",
            chunk.t_obs
        )));
    }
    let t_act = t_output + exec_latency;
    let steps: Vec<ActionStep> = chunk
        .steps
        .iter()
        .filter(|s| s.t_target >= t_act - TIME_EPS)
        .copied()
        .collect();
    let discarded = chunk.steps.len() - steps.len();
    if steps.is_empty() {
        return Err(Error::EmptyChunk { discarded });
    }
    Ok(Trimmed {
        chunk: ActionChunk {
            t_obs: chunk.t_obs,
            steps,
            dt_output: chunk.dt_output,
        },
        discarded,
        t_act,
    })
}

/// Changes execution speed: target offsets from `t_obs` are divided by
/// `speed_factor`. Poses and widths are untouched.
pub fn retime(chunk: &ActionChunk, speed_factor: f64) -> Result<ActionChunk> {
    if !(speed_factor.is_finite() && speed_factor > 0.0) {
        return Err(Error::InvalidValue(format!("speed factor {speed_factor} must be > 0")));
    }
    if speed_factor == 1.0 {
        return Ok(chunk.clone());
    }
    Ok(ActionChunk {
        t_obs: chunk.t_obs,
        steps: chunk
            .steps
            .iter()
            .map(|s| ActionStep {
                t_target: chunk.t_obs + (s.t_target - chunk.t_obs) / speed_factor,
                ..*s
            })
            .collect(),
        dt_output: chunk.dt_output / speed_factor,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsoluteTarget {
    pub t_target: f64,
    pub pose: Pose,
    pub width: f64,
}

/// Anchors the relative poses of `chunk` at `current_pose`.
pub fn to_absolute_targets(chunk: &ActionChunk, current_pose: &Pose) -> Vec<AbsoluteTarget> {
    chunk
        .steps
        .iter()
        .map(|s| AbsoluteTarget {
            t_target: s.t_target,
            pose: current_pose.compose(&s.rel_pose),
            width: s.width,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actuator {
    Robot,
    Gripper,
}

impl fmt::Display for Actuator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Actuator::Robot => "robot",
            Actuator::Gripper => "gripper",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Pose(Pose),
    Width(f64),
}

/// One line of the dispatch log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispatchEntry {
    pub t_send: f64,
    pub t_target: f64,
    pub actuator: Actuator,
    #[serde(flatten)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DispatchPlan {
    /// Ordered by `t_send`; robot before gripper on ties.
    pub entries: Vec<DispatchEntry>,
}

impl DispatchPlan {
    pub fn for_actuator(&self, actuator: Actuator) -> impl Iterator<Item = &DispatchEntry> {
        self.entries.iter().filter(move |e| e.actuator == actuator)
    }

    /// JSONL dispatch log, one entry per line.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut s = String::new();
        for e in &self.entries {
            s.push_str(&serde_json::to_string(e)?);
            s.push('\n');
        }
        Ok(s)
    }
}

/// Schedules each step's robot command at `t_target - l_robot_exec` and its
/// gripper command at `t_target - l_gripper_exec`. Poses are sent as given
/// (convert with [`to_absolute_targets`] first when the controller expects
/// absolute set-points). Fails if any send time precedes `now`.
pub fn plan_dispatch(targets: &[AbsoluteTarget], profile: &LatencyProfile, now: f64) -> Result<DispatchPlan> {
    let mut entries = Vec::with_capacity(targets.len() * 2);
    let mut late = Vec::new();
    for (k, s) in targets.iter().enumerate() {
        let robot = DispatchEntry {
            t_send: s.t_target - profile.l_robot_exec,
            t_target: s.t_target,
            actuator: Actuator::Robot,
            command: Command::Pose(s.pose),
        };
        let gripper = DispatchEntry {
            t_send: s.t_target - profile.l_gripper_exec,
            t_target: s.t_target,
            actuator: Actuator::Gripper,
            command: Command::Width(s.width),
        };
        if robot.t_send.min(gripper.t_send) < now - TIME_EPS {
            late.push(k);
        }
        entries.push(robot);
        entries.push(gripper);
    }
    if !late.is_empty() {
        return Err(Error::LatePlan { steps: late, now });
    }
    entries.sort_by(|a, b| a.t_send.total_cmp(&b.t_send).then(a.actuator.cmp(&b.actuator)));
    Ok(DispatchPlan { entries })
}

/// Anchors a relative chunk at `anchor` and plans its dispatch.
pub fn plan_chunk_dispatch(
    chunk: &ActionChunk,
    anchor: &Pose,
    profile: &LatencyProfile,
    now: f64,
) -> Result<DispatchPlan> {
    plan_dispatch(&to_absolute_targets(chunk, anchor), profile, now)
}

/// Per-actuator variant: each actuator drops only the steps *it* can no
/// longer reach (`t_target < t_output + its own latency`) instead of the
/// shared cut of [`trim_outdated`].
pub fn plan_dispatch_per_actuator(
    targets: &[AbsoluteTarget],
    profile: &LatencyProfile,
    t_output: f64,
) -> Result<DispatchPlan> {
    let mut entries = Vec::new();
    for s in targets {
        if s.t_target >= t_output + profile.l_robot_exec - TIME_EPS {
            entries.push(DispatchEntry {
                t_send: s.t_target - profile.l_robot_exec,
                t_target: s.t_target,
                actuator: Actuator::Robot,
                command: Command::Pose(s.pose),
            });
        }
        if s.t_target >= t_output + profile.l_gripper_exec - TIME_EPS {
            entries.push(DispatchEntry {
                t_send: s.t_target - profile.l_gripper_exec,
                t_target: s.t_target,
                actuator: Actuator::Gripper,
                command: Command::Width(s.width),
            });
        }
    }
    if entries.is_empty() {
        return Err(Error::EmptyChunk {
            discarded: targets.len(),
        });
    }
    entries.sort_by(|a, b| a.t_send.total_cmp(&b.t_send).then(a.actuator.cmp(&b.actuator)));
    Ok(DispatchPlan { entries })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueuedCommand {
    pub entry: DispatchEntry,
    /// Sequence number of the chunk that produced the command.
    pub chunk: u64,
}

/// Single-writer timeline of not-yet-executed commands.
///
/// Submitting a newer chunk preempts, per actuator, every queued command
/// from older chunks whose send time is at or after the newer chunk's first
/// send time for that actuator.
#[derive(Debug, Clone, Default)]
pub struct Dispatcher {
    robot: Vec<QueuedCommand>,
    gripper: Vec<QueuedCommand>,
    next_chunk: u64,
}

impl Dispatcher {
    pub fn new() -> Self {
        Self::default()
    }

    fn queue_mut(&mut self, a: Actuator) -> &mut Vec<QueuedCommand> {
        match a {
            Actuator::Robot => &mut self.robot,
            Actuator::Gripper => &mut self.gripper,
        }
    }

    pub fn queue(&self, a: Actuator) -> &[QueuedCommand] {
        match a {
            Actuator::Robot => &self.robot,
            Actuator::Gripper => &self.gripper,
        }
    }

    /// Adds a plan, returning its chunk sequence number and the number of
    /// commands it preempted.
    pub fn submit(&mut self, plan: &DispatchPlan) -> (u64, usize) {
        let chunk = self.next_chunk;
        self.next_chunk += 1;
        let mut preempted = 0;
        for a in [Actuator::Robot, Actuator::Gripper] {
            let new: Vec<QueuedCommand> = plan
                .for_actuator(a)
                .map(|&entry| QueuedCommand { entry, chunk })
                .collect();
            let Some(first) = new.first().map(|c| c.entry.t_send) else {
                continue;
            };
            let q = self.queue_mut(a);
            let before = q.len();
            q.retain(|c| c.entry.t_send < first - TIME_EPS);
            preempted += before - q.len();
            q.extend(new);
            q.sort_by(|x, y| x.entry.t_send.total_cmp(&y.entry.t_send));
        }
        (chunk, preempted)
    }

    /// Removes and returns every command with `t_send <= now`, in send
    /// order.
    pub fn pop_due(&mut self, now: f64) -> Vec<DispatchEntry> {
        let mut out = Vec::new();
        for a in [Actuator::Robot, Actuator::Gripper] {
            let q = self.queue_mut(a);
            let n = q.partition_point(|c| c.entry.t_send <= now + TIME_EPS);
            out.extend(q.drain(..n).map(|c| c.entry));
        }
        out.sort_by(|a, b| a.t_send.total_cmp(&b.t_send).then(a.actuator.cmp(&b.actuator)));
        out
    }

    pub fn pending(&self) -> usize {
        self.robot.len() + self.gripper.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chunk(t_obs: f64, dt: f64, n: usize) -> ActionChunk {
        let poses: Vec<Pose> = (0..n).map(|k| Pose::from_translation(0.01 * k as f64, 0.0, 0.0)).collect();
        ActionChunk::uniform(t_obs, dt, &poses, &vec![0.04; n]).unwrap()
    }

    fn profile(robot: f64, gripper: f64) -> LatencyProfile {
        LatencyProfile {
            l_robot_exec: robot,
            l_gripper_exec: gripper,
            ..Default::default()
        }
    }

    #[test]
    fn zero_latency_keeps_everything() {
        let c = chunk(1.0, 0.05, 6);
        let t = trim_outdated(&c, 1.0, &LatencyProfile::zeros()).unwrap();
        assert_eq!(t.discarded, 0);
        assert_eq!(t.chunk, c);
    }

    #[test]
    fn discards_first_five_steps() {
        let c = chunk(0.0, 0.05, 10);
        let t = trim_outdated(&c, 0.120, &profile(0.1, 0.0)).unwrap();
        assert_eq!(t.discarded, 5);
        assert!((t.chunk.steps[0].t_target - 0.25).abs() < 1e-12);
    }

    #[test]
    fn six_step_chunk_fully_outdated() {
        let c = chunk(0.0, 0.05, 6);
        let err = trim_outdated(&c, 0.3, &profile(0.1, 0.04)).unwrap_err();
        assert!(matches!(err, Error::EmptyChunk { discarded: 6 }));
    }

    #[test]
    fn trim_rejects_output_before_obs() {
        assert!(trim_outdated(&chunk(1.0, 0.05, 3), 0.5, &LatencyProfile::zeros()).is_err());
    }

    #[test]
    fn dispatch_sends_ahead_per_actuator() {
        let c = chunk(0.0, 0.05, 6);
        let targets = to_absolute_targets(&c, &Pose::identity());
        let p = plan_dispatch(&targets, &LatencyProfile::zeros(), 0.0).unwrap();
        assert!(p.entries.iter().all(|e| e.t_send == e.t_target));

        let prof = profile(0.1, 0.04);
        let p = plan_dispatch(&targets, &prof, -0.1).unwrap();
        let robot: Vec<f64> = p.for_actuator(Actuator::Robot).map(|e| e.t_send).collect();
        let grip: Vec<f64> = p.for_actuator(Actuator::Gripper).map(|e| e.t_send).collect();
        for (r, g) in robot.iter().zip(&grip) {
            assert!((g - r - 0.06).abs() < 1e-12);
        }
        assert!(robot.windows(2).all(|w| w[1] > w[0]));

        let err = plan_dispatch(&targets, &prof, 0.0).unwrap_err();
        match err {
            Error::LatePlan { steps, .. } => assert_eq!(steps, vec![0, 1]),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn per_actuator_trim_keeps_gripper_steps_longer() {
        let c = chunk(0.0, 0.05, 6);
        let targets = to_absolute_targets(&c, &Pose::identity());
        let p = plan_dispatch_per_actuator(&targets, &profile(0.1, 0.04), 0.1).unwrap();
        assert_eq!(p.for_actuator(Actuator::Robot).count(), 2);
        assert_eq!(p.for_actuator(Actuator::Gripper).count(), 3);
    }

    #[test]
    fn retime_examples() {
        let c = chunk(2.0, 0.1, 6);
        assert_eq!(retime(&c, 1.0).unwrap(), c);
        let slow = retime(&c, 0.5).unwrap();
        assert!((slow.steps[1].t_target - slow.steps[0].t_target - 0.2).abs() < 1e-12);
        let back = retime(&retime(&c, 2.0).unwrap(), 0.5).unwrap();
        for (a, b) in back.steps.iter().zip(&c.steps) {
            assert!((a.t_target - b.t_target).abs() < 1e-12);
            assert_eq!(a.rel_pose, b.rel_pose);
        }
        assert!(retime(&c, 0.0).is_err());
        assert!(retime(&c, -1.0).is_err());
    }

    #[test]
    fn absolute_targets() {
        let c = ActionChunk::uniform(0.0, 0.1, &[Pose::identity(); 3], &[0.0; 3]).unwrap();
        let cur = Pose::from_translation(0.3, 0.2, 0.1);
        assert!(to_absolute_targets(&c, &cur).iter().all(|t| t.pose == cur));
        let c = chunk(0.0, 0.1, 3);
        let abs = to_absolute_targets(&c, &Pose::identity());
        for (a, s) in abs.iter().zip(&c.steps) {
            assert_eq!(a.pose, s.rel_pose);
        }
    }

    #[test]
    fn chunk_validation() {
        let bad_width = ActionChunk::uniform(0.0, 0.1, &[Pose::identity()], &[0.09]);
        assert!(bad_width.is_err());
        let before_obs = ActionChunk::new(
            1.0,
            vec![ActionStep { t_target: 0.5, rel_pose: Pose::identity(), width: 0.0 }],
            0.1,
        );
        assert!(before_obs.is_err());
    }

    #[test]
    fn dispatch_log_format() {
        let e = DispatchEntry {
            t_send: 0.5,
            t_target: 0.6,
            actuator: Actuator::Gripper,
            command: Command::Width(0.02),
        };
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(s, r#"{"t_send":0.5,"t_target":0.6,"actuator":"gripper","width":0.02}"#);
        let back: DispatchEntry = serde_json::from_str(&s).unwrap();
        assert_eq!(back, e);
        let r = DispatchEntry {
            actuator: Actuator::Robot,
            command: Command::Pose(Pose::identity()),
            ..e
        };
        assert!(serde_json::to_string(&r).unwrap().contains(r#""pose":[0.0,0.0,0.0,1.0,0.0,0.0,0.0]"#));
    }

    #[test]
    fn dispatcher_preempts_older_pending_commands() {
        let prof = profile(0.1, 0.04);
        let mut d = Dispatcher::new();
        let c0 = chunk(0.0, 0.05, 6);
        let p0 = plan_dispatch(&to_absolute_targets(&c0, &Pose::identity()), &prof, -1.0).unwrap();
        d.submit(&p0);
        assert_eq!(d.pending(), 12);
        let c1 = chunk(0.1, 0.05, 6);
        let p1 = plan_dispatch(&to_absolute_targets(&c1, &Pose::identity()), &prof, -1.0).unwrap();
        let (seq, preempted) = d.submit(&p1);
        assert_eq!(seq, 1);
        // old targets at 0.10..0.25 are superseded for both actuators
        assert_eq!(preempted, 8);
        assert!(d.queue(Actuator::Robot).windows(2).all(|w| w[0].entry.t_send <= w[1].entry.t_send));
        let due = d.pop_due(0.0);
        // robot: -0.10, -0.05 (chunk 0) and 0.00 (chunk 1); gripper: -0.04
        assert_eq!(due.len(), 4);
        assert!(due.iter().all(|e| e.t_send <= 0.0 + 1e-12));
    }
}
