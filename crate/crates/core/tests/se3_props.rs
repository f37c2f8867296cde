mod common;

use common::{pose, pose_diff, trajectory};
use proptest::prelude::*;
use umi_core::se3::{accumulate_deltas, ActionRepr, Pose};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn relative_and_delta_ignore_the_global_frame(traj in trajectory(64), anchor in pose(), g in pose()) {
        let poses = traj.poses();
        let moved: Vec<Pose> = poses.iter().map(|p| g.compose(p)).collect();
        let moved_anchor = g.compose(&anchor);
        for repr in [ActionRepr::RelativeTrajectory, ActionRepr::Delta] {
            let a = repr.encode(&poses, &anchor);
            let b = repr.encode(&moved, &moved_anchor);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!(pose_diff(x, y) < 1e-9, "{repr}");
            }
        }
        let abs = ActionRepr::Absolute.encode(&moved, &moved_anchor);
        for (x, p) in abs.iter().zip(&poses) {
            prop_assert!(pose_diff(x, &g.compose(p)) < 1e-12);
        }
    }

    #[test]
    fn decode_inverts_encode(traj in trajectory(32), anchor in pose()) {
        let poses = traj.poses();
        for repr in ActionRepr::ALL {
            let back = repr.decode(&repr.encode(&poses, &anchor), &anchor);
            for (x, y) in back.iter().zip(&poses) {
                prop_assert!(pose_diff(x, y) < 1e-9);
            }
        }
    }

    #[test]
    fn conversion_goes_through_absolute(traj in trajectory(16), anchor in pose()) {
        let poses = traj.poses();
        for from in ActionRepr::ALL {
            for to in ActionRepr::ALL {
                let converted = from.convert(&from.encode(&poses, &anchor), &anchor, to);
                let direct = to.encode(&poses, &anchor);
                for (x, y) in converted.iter().zip(&direct) {
                    prop_assert!(pose_diff(x, y) < 1e-9);
                }
            }
        }
    }

    #[test]
    fn deltas_accumulate_back(traj in trajectory(64)) {
        prop_assume!(traj.len() >= 2);
        let poses = traj.poses();
        let rebuilt = accumulate_deltas(&traj.to_delta().unwrap(), poses[0]);
        prop_assert_eq!(rebuilt.len(), poses.len());
        for (x, y) in rebuilt.iter().zip(&poses) {
            prop_assert!(pose_diff(x, y) < 1e-9);
        }
    }

    #[test]
    fn proprioception_ends_at_identity(traj in trajectory(8)) {
        let rel = traj.relative_proprioception().unwrap();
        prop_assert_eq!(rel.last().unwrap().pose, Pose::identity());
        prop_assert_eq!(rel.times(), traj.times());
    }

    #[test]
    fn quaternions_stay_canonical(a in pose(), b in pose(), alpha in 0.0f64..=1.0) {
        for p in [a.compose(&b), a.inverse(), a.interpolate(&b, alpha).unwrap()] {
            prop_assert!(p.rotation().w >= 0.0);
        }
    }

    #[test]
    fn interpolation_hits_endpoints(a in pose(), b in pose()) {
        prop_assert!(pose_diff(&a.interpolate(&b, 0.0).unwrap(), &a) < 1e-12);
        prop_assert!(pose_diff(&a.interpolate(&b, 1.0).unwrap(), &b) < 1e-9);
    }

    #[test]
    fn angle_is_a_metric_on_rotations(a in pose(), b in pose(), c in pose()) {
        let (ab, bc, ac) = (a.angle_to(&b), b.angle_to(&c), a.angle_to(&c));
        prop_assert!((ab - b.angle_to(&a)).abs() < 1e-9);
        prop_assert!(ac <= ab + bc + 1e-9);
        prop_assert!(a.angle_to(&a) < 1e-12);
    }
}
