#![allow(dead_code)]

use nalgebra::Vector3;
use proptest::prelude::*;
use umi_core::se3::{Pose, PoseTrajectory, TimedPose};

pub fn vec3(r: f64) -> impl Strategy<Value = Vector3<f64>> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

/// Rotation vectors stay below pi so the angle is unambiguous.
pub fn pose() -> impl Strategy<Value = Pose> {
    (vec3(2.0), vec3(1.8)).prop_map(|(t, r)| Pose::from_rotation_vector(t, r))
}

pub fn trajectory(max_len: usize) -> impl Strategy<Value = PoseTrajectory> {
    (prop::collection::vec((pose(), 0.001f64..0.2), 1..=max_len), -10.0f64..10.0).prop_map(|(items, t0)| {
        let mut t = t0;
        let samples = items
            .into_iter()
            .map(|(pose, dt)| {
                t += dt;
                TimedPose { t, pose }
            })
            .collect();
        PoseTrajectory::new("world", samples).unwrap()
    })
}

/// Largest translation or rotation-matrix entry difference.
pub fn pose_diff(a: &Pose, b: &Pose) -> f64 {
    let (ma, mb) = (a.to_matrix(), b.to_matrix());
    let mut d: f64 = 0.0;
    for i in 0..3 {
        for j in 0..4 {
            d = d.max((ma[i][j] - mb[i][j]).abs());
        }
    }
    d
}
