//! Rigid transforms and trajectory representations.
//!
//! Poses are frame-to-world transforms. The pose of `b` expressed relative to
//! `a` is `a.inverse() * b`, so the base element of a relative trajectory is
//! the identity. Quaternions are kept with `w >= 0` after every operation.

use std::fmt;
use std::ops::Mul;

use nalgebra::{Quaternion, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// A rigid transform: translation in meters plus a unit-quaternion rotation.
#[derive(Clone, Copy, PartialEq)]
pub struct Pose {
    translation: Vector3<f64>,
    rotation: UnitQuaternion<f64>,
}

fn canonical(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    canonical_quat(*q.quaternion())
}

// Renormalizes only when the norm has drifted, so already-canonical values
// (e.g. parsed back from their own serialization) pass through bit-exact.
fn canonical_quat(q: Quaternion<f64>) -> UnitQuaternion<f64> {
    let n = q.norm();
    let q = if (n - 1.0).abs() > 1e-14 { q / n } else { q };
    UnitQuaternion::new_unchecked(if q.w < 0.0 { -q } else { q })
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            translation: Vector3::zeros(),
            rotation: UnitQuaternion::identity(),
        }
    }

    pub fn new(translation: Vector3<f64>, rotation: UnitQuaternion<f64>) -> Self {
        Self {
            translation,
            rotation: canonical(rotation),
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(Vector3::new(x, y, z), UnitQuaternion::identity())
    }

    /// Rotation of `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        let axis = Unit::new_normalize(axis);
        Self::new(Vector3::zeros(), UnitQuaternion::from_axis_angle(&axis, angle))
    }

    /// Rotation given as a rotation vector (axis scaled by angle).
    pub fn from_rotation_vector(translation: Vector3<f64>, rotvec: Vector3<f64>) -> Self {
        Self::new(translation, UnitQuaternion::from_scaled_axis(rotvec))
    }

    /// Builds a pose from `[x, y, z, qw, qx, qy, qz]`. The quaternion is
    /// normalized; a zero or non-finite quaternion is rejected.
    pub fn from_array(a: [f64; 7]) -> Result<Self> {
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue(format!("non-finite pose {a:?}")));
        }
        let q = Quaternion::new(a[3], a[4], a[5], a[6]);
        if q.norm() < 1e-12 {
            return Err(Error::InvalidValue("zero quaternion".into()));
        }
        Ok(Self {
            translation: Vector3::new(a[0], a[1], a[2]),
            rotation: canonical_quat(q),
        })
    }

    pub fn to_array(&self) -> [f64; 7] {
        let t = &self.translation;
        let q = self.rotation.quaternion();
        [t.x, t.y, t.z, q.w, q.i, q.j, q.k]
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn with_translation(mut self, translation: Vector3<f64>) -> Self {
        self.translation = translation;
        self
    }

    /// `self * other`: apply `other` first, then `self` (as `T_self · T_other`).
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(
            self.rotation * other.translation + self.translation,
            self.rotation * other.rotation,
        )
    }

    pub fn inverse(&self) -> Pose {
        let r_inv = self.rotation.inverse();
        Pose::new(-(r_inv * self.translation), r_inv)
    }

    /// This pose expressed in the frame of `base`.
    pub fn relative_to(&self, base: &Pose) -> Pose {
        base.inverse().compose(self)
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Geodesic rotation angle to `other`, `2·acos(|q1·q2|)`, in radians.
    pub fn angle_to(&self, other: &Pose) -> f64 {
        quat_angle(&self.rotation, &other.rotation)
    }

    pub fn translation_distance(&self, other: &Pose) -> f64 {
        (self.translation - other.translation).norm()
    }

    /// Rotation angle of this pose, in radians.
    pub fn angle(&self) -> f64 {
        quat_angle(&self.rotation, &UnitQuaternion::identity())
    }

    /// Interpolates translation linearly and rotation by slerp along the
    /// shorter arc. `alpha` must lie in `[0, 1]`.
    pub fn interpolate(&self, other: &Pose, alpha: f64) -> Result<Pose> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::AlphaOutOfRange(alpha));
        }
        Ok(self.interpolate_unchecked(other, alpha))
    }

    pub(crate) fn interpolate_unchecked(&self, other: &Pose, alpha: f64) -> Pose {
        if alpha == 0.0 {
            return *self;
        }
        if alpha == 1.0 {
            return *other;
        }
        let translation = self.translation.lerp(&other.translation, alpha);
        let q0 = self.rotation;
        let mut q1 = other.rotation;
        if q0.coords.dot(&q1.coords) < 0.0 {
            q1 = UnitQuaternion::new_unchecked(-*q1.quaternion());
        }
        // try_slerp returns None only for (near) antipodal inputs, which the
        // sign flip above rules out; nlerp is the right limit for near-equal.
        let rotation = q0
            .try_slerp(&q1, alpha, 1e-12)
            .unwrap_or_else(|| q0.nlerp(&q1, alpha));
        Pose::new(translation, rotation)
    }

    /// Component-wise closeness: translation distance and rotation angle.
    pub fn approx_eq(&self, other: &Pose, tol: f64) -> bool {
        self.translation_distance(other) <= tol && self.angle_to(other) <= tol
    }

    /// Homogeneous 4x4 matrix, row-major.
    pub fn to_matrix(&self) -> [[f64; 4]; 4] {
        let r = self.rotation.to_rotation_matrix();
        let m = r.matrix();
        let t = &self.translation;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)], t.x],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)], t.y],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)], t.z],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }
}

/// Geodesic angle between two rotations, `2·acos(|a·b|)`, evaluated as
/// `2·atan2(|imag(a⁻¹b)|, |real(a⁻¹b)|)`, which keeps full precision near
/// zero.
pub fn quat_angle(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    let r = a.inverse() * b;
    2.0 * r.imag().norm().atan2(r.w.abs())
}

impl Default for Pose {
    fn default() -> Self {
        Pose::identity()
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

impl<'a> Mul<&'a Pose> for &'a Pose {
    type Output = Pose;
    fn mul(self, rhs: &Pose) -> Pose {
        self.compose(rhs)
    }
}

impl fmt::Debug for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pose{:?}", self.to_array())
    }
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let a = <[f64; 7]>::deserialize(d)?;
        Pose::from_array(a).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedPose {
    pub t: f64,
    pub pose: Pose,
}

/// Time-ordered poses in a named coordinate frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTrajectory")]
pub struct PoseTrajectory {
    frame_id: String,
    samples: Vec<TimedPose>,
}

#[derive(Deserialize)]
struct RawTrajectory {
    frame_id: String,
    samples: Vec<TimedPose>,
}

impl TryFrom<RawTrajectory> for PoseTrajectory {
    type Error = Error;
    fn try_from(raw: RawTrajectory) -> Result<Self> {
        PoseTrajectory::new(raw.frame_id, raw.samples)
    }
}

pub(crate) fn check_times(times: impl IntoIterator<Item = f64>) -> Result<()> {
    let mut prev = f64::NEG_INFINITY;
    for (index, t) in times.into_iter().enumerate() {
        if !t.is_finite() || t <= prev {
            return Err(Error::NonMonotonic { index });
        }
        prev = t;
    }
    Ok(())
}

impl PoseTrajectory {
    pub fn new(frame_id: impl Into<String>, samples: Vec<TimedPose>) -> Result<Self> {
        check_times(samples.iter().map(|s| s.t))?;
        Ok(Self {
            frame_id: frame_id.into(),
            samples,
        })
    }

    pub fn from_parts(
        frame_id: impl Into<String>,
        times: &[f64],
        poses: &[Pose],
    ) -> Result<Self> {
        if times.len() != poses.len() {
            return Err(Error::InvalidValue(format!(
                "{} timestamps for {} poses",
                times.len(),
                poses.len()
            )));
        }
        let samples = times
            .iter()
            .zip(poses)
            .map(|(&t, &pose)| TimedPose { t, pose })
            .collect();
        Self::new(frame_id, samples)
    }

    pub fn frame_id(&self) -> &str {
        &self.frame_id
    }

    pub fn samples(&self) -> &[TimedPose] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn poses(&self) -> Vec<Pose> {
        self.samples.iter().map(|s| s.pose).collect()
    }

    pub fn first(&self) -> Option<&TimedPose> {
        self.samples.first()
    }

    pub fn last(&self) -> Option<&TimedPose> {
        self.samples.last()
    }

    /// Left-multiplies every pose by `g` (re-expresses the trajectory in
    /// another world frame).
    pub fn transformed(&self, g: &Pose, frame_id: impl Into<String>) -> PoseTrajectory {
        PoseTrajectory {
            frame_id: frame_id.into(),
            samples: self
                .samples
                .iter()
                .map(|s| TimedPose {
                    t: s.t,
                    pose: g.compose(&s.pose),
                })
                .collect(),
        }
    }

    /// Every pose relative to the pose at `base_index`.
    pub fn relative_trajectory(&self, base_index: usize) -> Result<PoseTrajectory> {
        if self.is_empty() {
            return Err(Error::Empty("trajectory"));
        }
        let base = self.samples.get(base_index).ok_or(Error::IndexOutOfRange {
            index: base_index,
            len: self.len(),
        })?;
        let base_inv = base.pose.inverse();
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(k, s)| TimedPose {
                t: s.t,
                pose: if k == base_index {
                    Pose::identity()
                } else {
                    base_inv.compose(&s.pose)
                },
            })
            .collect();
        Ok(PoseTrajectory {
            frame_id: format!("relative:{}", base.t),
            samples,
        })
    }

    /// Step-to-step transforms `inverse(p[k]) * p[k+1]`.
    pub fn to_delta(&self) -> Result<Vec<Pose>> {
        if self.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: self.len(),
            });
        }
        Ok(self
            .samples
            .windows(2)
            .map(|w| w[0].pose.inverse().compose(&w[1].pose))
            .collect())
    }

    /// Every pose relative to the last (current) pose; the last element is
    /// the identity.
    pub fn relative_proprioception(&self) -> Result<PoseTrajectory> {
        if self.is_empty() {
            return Err(Error::Empty("proprioception history"));
        }
        self.relative_trajectory(self.len() - 1)
    }
}

/// Chains `deltas` onto `base`: element 0 is `base`, element `k+1` is
/// element `k` composed with `deltas[k]`.
pub fn accumulate_deltas(deltas: &[Pose], base: Pose) -> Vec<Pose> {
    let mut out = Vec::with_capacity(deltas.len() + 1);
    out.push(base);
    let mut cur = base;
    for d in deltas {
        cur = cur.compose(d);
        out.push(cur);
    }
    out
}

/// Relative pose of the right gripper seen from the left one.
pub fn inter_gripper_pose(left: &Pose, right: &Pose) -> Pose {
    left.inverse().compose(right)
}

pub fn interpolate_pose(a: &Pose, b: &Pose, alpha: f64) -> Result<Pose> {
    a.interpolate(b, alpha)
}

/// Action-space encodings of a pose sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionRepr {
    /// Each pose relative to the anchor (current end-effector) pose.
    RelativeTrajectory,
    /// Each pose relative to the previous one; the first relative to the
    /// anchor.
    Delta,
    /// Poses in a global frame.
    Absolute,
}

impl ActionRepr {
    pub const ALL: [ActionRepr; 3] = [
        ActionRepr::RelativeTrajectory,
        ActionRepr::Delta,
        ActionRepr::Absolute,
    ];

    /// Encodes absolute `poses` given the anchor pose they follow.
    pub fn encode(self, poses: &[Pose], anchor: &Pose) -> Vec<Pose> {
        match self {
            ActionRepr::Absolute => poses.to_vec(),
            ActionRepr::RelativeTrajectory => {
                let inv = anchor.inverse();
                poses.iter().map(|p| inv.compose(p)).collect()
            }
            ActionRepr::Delta => {
                let mut prev = *anchor;
                poses
                    .iter()
                    .map(|p| {
                        let d = prev.inverse().compose(p);
                        prev = *p;
                        d
                    })
                    .collect()
            }
        }
    }

    /// Inverse of [`ActionRepr::encode`].
    pub fn decode(self, encoded: &[Pose], anchor: &Pose) -> Vec<Pose> {
        match self {
            ActionRepr::Absolute => encoded.to_vec(),
            ActionRepr::RelativeTrajectory => encoded.iter().map(|p| anchor.compose(p)).collect(),
            ActionRepr::Delta => accumulate_deltas(encoded, *anchor).split_off(1),
        }
    }

    /// Re-encodes a sequence from one representation into another.
    pub fn convert(self, encoded: &[Pose], anchor: &Pose, to: ActionRepr) -> Vec<Pose> {
        to.encode(&self.decode(encoded, anchor), anchor)
    }
}

impl fmt::Display for ActionRepr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActionRepr::RelativeTrajectory => "relative_trajectory",
            ActionRepr::Delta => "delta",
            ActionRepr::Absolute => "absolute",
        })
    }
}
