//! Trajectory accuracy: rigid alignment, ATE and inter-gripper RPE.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::se3::{inter_gripper_pose, Pose, PoseTrajectory};
use crate::{stats, Error, Result};

/// Maximum timestamp distance for nearest-neighbour association.
pub const ASSOCIATION_GATE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignMode {
    /// Rotation and translation.
    #[default]
    Rigid,
    /// Rotation, translation and uniform scale. Diagnostics only.
    Similarity,
    /// Compare in the raw frames.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub gate: f64,
    pub align: AlignMode,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            gate: ASSOCIATION_GATE,
            align: AlignMode::Rigid,
        }
    }
}

/// Index pairs `(est, gt)` with `|t_est - t_gt| <= gate`. Each ground-truth
/// sample is used at most once; conflicts keep the closer estimate.
pub fn associate(est: &PoseTrajectory, gt: &PoseTrajectory, gate: f64) -> Vec<(usize, usize)> {
    let gt_times = gt.times();
    let mut best: Vec<Option<(usize, f64)>> = vec![None; gt_times.len()];
    for (i, s) in est.samples().iter().enumerate() {
        let Some(j) = nearest(&gt_times, s.t) else { continue };
        let d = (gt_times[j] - s.t).abs();
        if d > gate {
            continue;
        }
        match best[j] {
            Some((_, bd)) if bd <= d => {}
            _ => best[j] = Some((i, d)),
        }
    }
    let mut pairs: Vec<(usize, usize)> = best
        .iter()
        .enumerate()
        .filter_map(|(j, b)| b.map(|(i, _)| (i, j)))
        .collect();
    pairs.sort_unstable();
    pairs
}

fn nearest(times: &[f64], t: f64) -> Option<usize> {
    if times.is_empty() {
        return None;
    }
    let k = times.partition_point(|&x| x < t);
    if k == 0 {
        return Some(0);
    }
    if k == times.len() {
        return Some(k - 1);
    }
    Some(if t - times[k - 1] <= times[k] - t { k - 1 } else { k })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    /// Maps the estimated frame into the ground-truth frame.
    pub transform: Pose,
    /// 1.0 unless a similarity alignment was requested.
    pub scale: f64,
    /// RMS position residual after alignment, meters.
    pub residual_rmse: f64,
    pub matched: usize,
}

impl AlignmentResult {
    pub fn identity(matched: usize, residual_rmse: f64) -> Self {
        Self {
            transform: Pose::identity(),
            scale: 1.0,
            residual_rmse,
            matched,
        }
    }

    pub fn apply(&self, p: &Pose) -> Pose {
        let t = self.transform.rotation() * p.translation() * self.scale + self.transform.translation();
        Pose::new(t, self.transform.rotation() * p.rotation())
    }
}

/// Least-squares rigid transform taking `est` onto `gt` (no scale).
pub fn rigid_align(est: &PoseTrajectory, gt: &PoseTrajectory) -> Result<AlignmentResult> {
    let pairs = associate(est, gt, ASSOCIATION_GATE);
    let (p, q) = matched_points(est, gt, &pairs);
    umeyama(&p, &q, false)
}

/// Closed-form alignment of point sets `src -> dst`.
pub fn umeyama(src: &[Vector3<f64>], dst: &[Vector3<f64>], with_scale: bool) -> Result<AlignmentResult> {
    let n = src.len();
    if n != dst.len() {
        return Err(Error::InvalidValue("point sets differ in length".into()));
    }
    if n == 0 {
        return Err(Error::NoAssociation);
    }
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: n });
    }
    let inv_n = 1.0 / n as f64;
    let mu_p = src.iter().sum::<Vector3<f64>>() * inv_n;
    let mu_q = dst.iter().sum::<Vector3<f64>>() * inv_n;

    let mut spread = Matrix3::zeros();
    let mut cov = Matrix3::zeros();
    let mut var_p = 0.0;
    for (p, q) in src.iter().zip(dst) {
        let dp = p - mu_p;
        spread += dp * dp.transpose();
        cov += (q - mu_q) * dp.transpose();
        var_p += dp.norm_squared();
    }
    cov *= inv_n;
    var_p *= inv_n;

    let sv = spread.singular_values();
    let mut s = [sv[0], sv[1], sv[2]];
    s.sort_by(|a, b| b.total_cmp(a));
    let scale_ref = s[0].max(f64::MIN_POSITIVE);
    if s[0] <= 1e-18 {
        return Err(Error::Degenerate("coincident points".into()));
    }
    if s[1] <= 1e-10 * scale_ref {
        return Err(Error::Degenerate("collinear points".into()));
    }

    let svd = cov.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut d = Matrix3::identity();
    if (u.determinant() * v_t.determinant()) < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let r = u * d * v_t;
    let scale = if with_scale {
        (Matrix3::from_diagonal(&svd.singular_values) * d).trace() / var_p
    } else {
        1.0
    };
    let t = mu_q - r * mu_p * scale;
    let rot = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
    let transform = Pose::new(t, rot);
    let sq: f64 = src
        .iter()
        .zip(dst)
        .map(|(p, q)| (rot * p * scale + t - q).norm_squared())
        .sum();
    Ok(AlignmentResult {
        transform,
        scale,
        residual_rmse: (sq * inv_n).sqrt(),
        matched: n,
    })
}

fn matched_points(
    est: &PoseTrajectory,
    gt: &PoseTrajectory,
    pairs: &[(usize, usize)],
) -> (Vec<Vector3<f64>>, Vec<Vector3<f64>>) {
    pairs
        .iter()
        .map(|&(i, j)| {
            (
                *est.samples()[i].pose.translation(),
                *gt.samples()[j].pose.translation(),
            )
        })
        .unzip()
}

/// RMS position distance over associated samples without any alignment.
pub fn unaligned_rmse(est: &PoseTrajectory, gt: &PoseTrajectory) -> Result<f64> {
    let pairs = associate(est, gt, ASSOCIATION_GATE);
    let (p, q) = matched_points(est, gt, &pairs);
    let d: Vec<f64> = p.iter().zip(&q).map(|(a, b)| (a - b).norm()).collect();
    stats::rms(&d).ok_or(Error::NoAssociation)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AteReport {
    pub pos_mean: f64,
    pub pos_rmse: f64,
    /// Degrees.
    pub rot_mean: f64,
    /// Degrees.
    pub rot_rmse: f64,
    pub alignment: AlignmentResult,
    /// Ground-truth timestamps of the associated samples.
    pub times: Vec<f64>,
    pub pos_errors: Vec<f64>,
    /// Degrees.
    pub rot_errors: Vec<f64>,
}

pub fn ate(est: &PoseTrajectory, gt: &PoseTrajectory) -> Result<AteReport> {
    ate_with(est, gt, &EvalOptions::default())
}

pub fn ate_with(est: &PoseTrajectory, gt: &PoseTrajectory, opts: &EvalOptions) -> Result<AteReport> {
    let pairs = associate(est, gt, opts.gate);
    if pairs.is_empty() {
        return Err(Error::NoAssociation);
    }
    let (p, q) = matched_points(est, gt, &pairs);
    let alignment = match opts.align {
        AlignMode::Rigid => umeyama(&p, &q, false)?,
        AlignMode::Similarity => umeyama(&p, &q, true)?,
        AlignMode::None => AlignmentResult::identity(pairs.len(), 0.0),
    };
    let mut times = Vec::with_capacity(pairs.len());
    let mut pos_errors = Vec::with_capacity(pairs.len());
    let mut rot_errors = Vec::with_capacity(pairs.len());
    for &(i, j) in &pairs {
        let e = alignment.apply(&est.samples()[i].pose);
        let g = &gt.samples()[j];
        times.push(g.t);
        pos_errors.push(e.translation_distance(&g.pose));
        rot_errors.push(e.angle_to(&g.pose).to_degrees());
    }
    let mut alignment = alignment;
    if opts.align == AlignMode::None {
        alignment.residual_rmse = stats::rms(&pos_errors).unwrap_or(0.0);
    }
    Ok(AteReport {
        pos_mean: stats::mean(&pos_errors).unwrap_or(0.0),
        pos_rmse: stats::rms(&pos_errors).unwrap_or(0.0),
        rot_mean: stats::mean(&rot_errors).unwrap_or(0.0),
        rot_rmse: stats::rms(&rot_errors).unwrap_or(0.0),
        alignment,
        times,
        pos_errors,
        rot_errors,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpeReport {
    pub pos_mean: f64,
    pub pos_rmse: f64,
    /// Degrees.
    pub rot_mean: f64,
    pub rot_rmse: f64,
    pub matched: usize,
}

/// Error of the left-to-right relative pose. Timestamps of `left_est` drive
/// the association; the other three trajectories are matched within the
/// gate.
pub fn inter_gripper_rpe(
    left_est: &PoseTrajectory,
    right_est: &PoseTrajectory,
    left_gt: &PoseTrajectory,
    right_gt: &PoseTrajectory,
) -> Result<RpeReport> {
    inter_gripper_rpe_with(left_est, right_est, left_gt, right_gt, ASSOCIATION_GATE)
}

pub fn inter_gripper_rpe_with(
    left_est: &PoseTrajectory,
    right_est: &PoseTrajectory,
    left_gt: &PoseTrajectory,
    right_gt: &PoseTrajectory,
    gate: f64,
) -> Result<RpeReport> {
    for (a, b) in [(left_est, right_est), (left_gt, right_gt)] {
        if a.frame_id() != b.frame_id() {
            return Err(Error::FrameMismatch {
                left: a.frame_id().into(),
                right: b.frame_id().into(),
            });
        }
    }
    let others = [right_est, left_gt, right_gt].map(|t| t.times());
    let mut pos = Vec::new();
    let mut rot = Vec::new();
    for s in left_est.samples() {
        let idx: Option<Vec<usize>> = others
            .iter()
            .map(|times| nearest(times, s.t).filter(|&j| (times[j] - s.t).abs() <= gate))
            .collect();
        let Some(idx) = idx else { continue };
        let est_rel = inter_gripper_pose(&s.pose, &right_est.samples()[idx[0]].pose);
        let gt_rel = inter_gripper_pose(&left_gt.samples()[idx[1]].pose, &right_gt.samples()[idx[2]].pose);
        pos.push(est_rel.translation_distance(&gt_rel));
        rot.push(est_rel.angle_to(&gt_rel).to_degrees());
    }
    if pos.is_empty() {
        return Err(Error::NoAssociation);
    }
    Ok(RpeReport {
        pos_mean: stats::mean(&pos).unwrap_or(0.0),
        pos_rmse: stats::rms(&pos).unwrap_or(0.0),
        rot_mean: stats::mean(&rot).unwrap_or(0.0),
        rot_rmse: stats::rms(&rot).unwrap_or(0.0),
        matched: pos.len(),
    })
}
