use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::se3::{Pose, PoseTrajectory};
use crate::{Error, Result};

/// Reach, workspace and speed limits of a target arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KinematicModel {
    /// Arm base in the map frame.
    pub base_pose: Pose,
    pub reach_min: f64,
    pub reach_max: f64,
    /// Height bounds in the base frame.
    pub z_min: f64,
    pub z_max: f64,
    pub v_max: f64,
    pub a_max: f64,
}

impl KinematicModel {
    pub fn validate(&self) -> Result<()> {
        let ok = self.reach_min >= 0.0
            && self.reach_min < self.reach_max
            && self.z_min < self.z_max
            && self.v_max > 0.0
            && self.a_max > 0.0
            && [self.reach_max, self.z_min, self.z_max, self.v_max, self.a_max]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid kinematic model: {self:?}")))
        }
    }
}

/// One model shared by every arm, or one per arm (left first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Shared(KinematicModel),
    PerArm(Vec<KinematicModel>),
}

impl ModelSpec {
    pub fn for_arm(&self, arm: usize) -> Result<&KinematicModel> {
        match self {
            ModelSpec::Shared(m) => Ok(m),
            ModelSpec::PerArm(v) => v
                .get(arm)
                .ok_or_else(|| Error::InvalidConfig(format!("no kinematic model for arm {arm}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Shared(m) => m.validate(),
            ModelSpec::PerArm(v) if v.is_empty() => Err(Error::InvalidConfig("empty model list".into())),
            ModelSpec::PerArm(v) => v.iter().try_for_each(KinematicModel::validate),
        }
    }
}

/// Constraints in the order they are checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    InsufficientData,
    Reach,
    Workspace,
    Speed,
    Acceleration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Accepted,
    Rejected {
        reason: RejectReason,
        /// Arm index (0 = left).
        arm: usize,
        /// First violating sample.
        #[serde(skip_serializing_if = "Option::is_none", default)]
        index: Option<usize>,
        /// Offending value (distance, height, speed or acceleration).
        #[serde(skip_serializing_if = "Option::is_none", default)]
        value: Option<f64>,
    },
}

impl Verdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Verdict::Accepted)
    }

    pub fn reason(&self) -> Option<RejectReason> {
        match self {
            Verdict::Accepted => None,
            Verdict::Rejected { reason, .. } => Some(*reason),
        }
    }
}

fn positions(traj: &PoseTrajectory, base: &Pose) -> Vec<Vector3<f64>> {
    let inv = base.inverse();
    traj.samples()
        .iter()
        .map(|s| inv.transform_point(s.pose.translation()))
        .collect()
}

/// Speed at every sample: central differences inside, one-sided at the ends.
pub fn speeds(traj: &PoseTrajectory) -> Vec<f64> {
    let t = traj.times();
    let p: Vec<Vector3<f64>> = traj.samples().iter().map(|s| *s.pose.translation()).collect();
    let n = p.len();
    (0..n)
        .map(|i| {
            if n < 2 {
                return 0.0;
            }
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            (p[b] - p[a]).norm() / (t[b] - t[a])
        })
        .collect()
}

/// Acceleration magnitude at interior samples `1..n-1` (three-point stencil
/// for uneven spacing).
pub fn accelerations(traj: &PoseTrajectory) -> Vec<f64> {
    let t = traj.times();
    let p: Vec<Vector3<f64>> = traj.samples().iter().map(|s| *s.pose.translation()).collect();
    (1..p.len().saturating_sub(1))
        .map(|i| {
            let fwd = (p[i + 1] - p[i]) / (t[i + 1] - t[i]);
            let back = (p[i] - p[i - 1]) / (t[i] - t[i - 1]);
            (2.0 * (fwd - back) / (t[i + 1] - t[i - 1])).norm()
        })
        .collect()
}

type Violation = (usize, usize, f64);

fn first_violation(per_arm: &[Option<(usize, f64)>]) -> Option<Violation> {
    per_arm
        .iter()
        .enumerate()
        .filter_map(|(arm, v)| v.map(|(i, x)| (arm, i, x)))
        .next()
}

/// Whole-episode verdict. Constraints are checked in [`RejectReason`] order
/// and the first violated one is reported, with the lowest arm index and
/// first offending sample.
pub fn kinematic_filter(trajectories: &[PoseTrajectory], models: &ModelSpec) -> Result<Verdict> {
    models.validate()?;
    if trajectories.is_empty() {
        return Err(Error::Empty("episode"));
    }
    if let Some(arm) = trajectories.iter().position(|t| t.len() < 3) {
        return Ok(Verdict::Rejected {
            reason: RejectReason::InsufficientData,
            arm,
            index: None,
            value: None,
        });
    }
    let mut reach = Vec::new();
    let mut work = Vec::new();
    let mut speed = Vec::new();
    let mut accel = Vec::new();
    for (arm, traj) in trajectories.iter().enumerate() {
        let m = models.for_arm(arm)?;
        let p = positions(traj, &m.base_pose);
        reach.push(p.iter().enumerate().find_map(|(i, x)| {
            let d = x.norm();
            (d < m.reach_min || d > m.reach_max).then_some((i, d))
        }));
        work.push(
            p.iter()
                .enumerate()
                .find_map(|(i, x)| (x.z < m.z_min || x.z > m.z_max).then_some((i, x.z))),
        );
        speed.push(
            speeds(traj)
                .into_iter()
                .enumerate()
                .find(|&(_, v)| v > m.v_max),
        );
        accel.push(
            accelerations(traj)
                .into_iter()
                .enumerate()
                .find(|&(_, a)| a > m.a_max)
                .map(|(i, a)| (i + 1, a)),
        );
    }
    for (reason, hits) in [
        (RejectReason::Reach, reach),
        (RejectReason::Workspace, work),
        (RejectReason::Speed, speed),
        (RejectReason::Acceleration, accel),
    ] {
        if let Some((arm, i, v)) = first_violation(&hits) {
            return Ok(Verdict::Rejected {
                reason,
                arm,
                index: Some(i),
                value: Some(v),
            });
        }
    }
    Ok(Verdict::Accepted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se3::TimedPose;

    fn model() -> ModelSpec {
        ModelSpec::Shared(KinematicModel {
            base_pose: Pose::identity(),
            reach_min: 0.2,
            reach_max: 0.9,
            z_min: -0.5,
            z_max: 1.0,
            v_max: 2.0,
            a_max: 20.0,
        })
    }

    fn traj(points: &[(f64, [f64; 3])]) -> PoseTrajectory {
        PoseTrajectory::new(
            "map",
            points
                .iter()
                .map(|&(t, [x, y, z])| TimedPose {
                    t,
                    pose: Pose::from_translation(x, y, z),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn static_pose_in_reach_is_accepted() {
        let t = traj(&[(0.0, [0.5, 0.0, 0.0]), (0.1, [0.5, 0.0, 0.0]), (0.2, [0.5, 0.0, 0.0])]);
        assert_eq!(kinematic_filter(&[t], &model()).unwrap(), Verdict::Accepted);
    }

    #[test]
    fn out_of_reach() {
        let t = traj(&[(0.0, [1.2, 0.0, 0.0]), (0.1, [1.2, 0.0, 0.0]), (0.2, [1.2, 0.0, 0.0])]);
        let v = kinematic_filter(&[t], &model()).unwrap();
        assert_eq!(v.reason(), Some(RejectReason::Reach));
    }

    #[test]
    fn fast_travel_is_rejected_for_speed() {
        let pts: Vec<_> = (0..=10)
            .map(|i| (i as f64 * 0.02, [-0.5 + 0.1 * i as f64, 0.4, 0.0]))
            .collect();
        let v = kinematic_filter(&[traj(&pts)], &model()).unwrap();
        match v {
            Verdict::Rejected {
                reason: RejectReason::Speed,
                index: Some(0),
                value: Some(s),
                ..
            } => assert!((s - 5.0).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn too_short() {
        let t = traj(&[(0.0, [0.5, 0.0, 0.0]), (0.1, [0.5, 0.0, 0.0])]);
        assert_eq!(
            kinematic_filter(&[t], &model()).unwrap().reason(),
            Some(RejectReason::InsufficientData)
        );
    }

    #[test]
    fn uneven_stencil_is_exact_for_quadratics() {
        let ts = [0.0, 0.1, 0.25, 0.3, 0.6];
        let pts: Vec<_> = ts.iter().map(|&t| (t, [1.5 * t * t, 0.0, 0.0])).collect();
        for a in accelerations(&traj(&pts)) {
            assert!((a - 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn verdict_json_shape() {
        let v = Verdict::Rejected {
            reason: RejectReason::Reach,
            arm: 0,
            index: Some(3),
            value: None,
        };
        assert_eq!(
            serde_json::to_string(&v).unwrap(),
            r#"{"status":"rejected","reason":"reach","arm":0,"index":3}"#
        );
        assert_eq!(serde_json::to_string(&Verdict::Accepted).unwrap(), r#"{"status":"accepted"}"#);
    }
}
