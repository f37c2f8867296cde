//! Seeded synthetic data: noisy trajectories for evaluation tests and a
//! complete multi-scene demonstration corpus for the pipeline.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::pipeline::{
    ExportConfig, GripperCalibration, KinematicModel, MarkerMap, ModelSpec, RecordingEntry, RejectReason, Role,
    SessionManifest,
};
use crate::se3::{ActionRepr, Pose, PoseTrajectory, TimedPose};
use crate::stream::{MarkerPair, Record, StreamFile, StreamHeader};
use crate::Result;

/// Per-axis standard deviation for which the mean norm of an isotropic 3-D
/// Gaussian equals `mean_norm` (the mean of a chi distribution with three
/// degrees of freedom is `2 * sqrt(2 / pi) * sigma`).
pub fn sigma_for_mean_norm(mean_norm: f64) -> f64 {
    mean_norm * (std::f64::consts::PI / 8.0).sqrt()
}

/// Adds independent position and rotation noise to every pose. The levels
/// are the expected error magnitudes: mean translation error `pos_mean`
/// meters and mean rotation angle `rot_mean` radians (small-angle).
pub fn perturb(traj: &PoseTrajectory, pos_mean: f64, rot_mean: f64, rng: &mut impl Rng) -> PoseTrajectory {
    let np = Normal::new(0.0, sigma_for_mean_norm(pos_mean)).expect("finite sigma");
    let nr = Normal::new(0.0, sigma_for_mean_norm(rot_mean)).expect("finite sigma");
    let samples = traj
        .samples()
        .iter()
        .map(|s| {
            let dp = Vector3::from_fn(|_, _| np.sample(rng));
            let dr = Vector3::from_fn(|_, _| nr.sample(rng));
            let noise = Pose::from_rotation_vector(Vector3::zeros(), dr);
            let p = s.pose.compose(&noise);
            TimedPose {
                t: s.t,
                pose: p.with_translation(p.translation() + dp),
            }
        })
        .collect();
    PoseTrajectory::new(traj.frame_id(), samples).expect("same timestamps")
}

/// Smooth random 6-DoF motion around `center`.
#[derive(Debug, Clone)]
pub struct Wander {
    center: Vector3<f64>,
    terms: Vec<(Vector3<f64>, f64, f64)>,
    rot: Vec<(Vector3<f64>, f64, f64)>,
}

impl Wander {
    pub fn new(center: Vector3<f64>, amplitude: f64, rng: &mut impl Rng) -> Self {
        let mut term = |a: f64| {
            (
                Vector3::from_fn(|_, _| rng.random_range(-a..=a)),
                rng.random_range(0.5..2.0),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        };
        let terms = (0..3).map(|_| term(amplitude)).collect();
        let rot = (0..2).map(|_| term(0.3)).collect();
        Self { center, terms, rot }
    }

    pub fn pose(&self, t: f64) -> Pose {
        let p = self
            .terms
            .iter()
            .fold(self.center, |acc, (a, w, ph)| acc + a * (w * t + ph).sin());
        let r = self
            .rot
            .iter()
            .fold(Vector3::zeros(), |acc, (a, w, ph)| acc + a * (w * t + ph).sin());
        Pose::from_rotation_vector(p, r)
    }

    pub fn trajectory(&self, frame_id: &str, t0: f64, duration: f64, rate: f64) -> PoseTrajectory {
        let n = (duration * rate).round() as usize + 1;
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 / rate;
                TimedPose {
                    t: t0 + t,
                    pose: self.pose(t),
                }
            })
            .collect();
        PoseTrajectory::new(frame_id, samples).expect("increasing times")
    }
}

/// Shape of the generated corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub scenes: usize,
    pub pairs_per_scene: usize,
    pub unpaired_per_scene: usize,
    /// Pose and width sample rate.
    pub rate: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            scenes: 3,
            pairs_per_scene: 8,
            unpaired_per_scene: 1,
            rate: 60.0,
        }
    }
}

/// What the generator put into a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneTruth {
    pub scene_id: String,
    pub calibrations: Vec<GripperCalibration>,
    /// Demo path to the constraint deliberately violated in it.
    pub violations: BTreeMap<String, RejectReason>,
    pub pairs: Vec<(String, String)>,
    pub unpaired: Vec<String>,
    pub recordings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusTruth {
    pub seed: u64,
    pub spec: CorpusSpec,
    pub scenes: Vec<SceneTruth>,
}

pub const LEFT_SERIAL: &str = "GX0001";
pub const RIGHT_SERIAL: &str = "GX0002";
pub const MAP_FRAME: &str = "map";

/// Kinematic model the corpus is designed around.
pub fn corpus_model() -> KinematicModel {
    KinematicModel {
        base_pose: Pose::identity(),
        reach_min: 0.15,
        reach_max: 0.95,
        z_min: -0.3,
        z_max: 0.8,
        v_max: 1.5,
        a_max: 15.0,
    }
}

pub fn corpus_export_config() -> ExportConfig {
    ExportConfig {
        freq: 10.0,
        obs_horizon: 2,
        action_horizon: 6,
        repr: ActionRepr::RelativeTrajectory,
        global_frame: None,
    }
}

fn marker_map() -> MarkerMap {
    MarkerMap {
        slope: 0.0001,
        offset: 0.0,
    }
}

fn markers_for(width: f64, map: &MarkerMap) -> MarkerPair {
    let d = (width - map.offset) / map.slope;
    [Some([640.0 - d / 2.0, 360.0]), Some([640.0 + d / 2.0, 360.0])]
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// Width record or marker record, depending on the scene.
fn width_record(t: f64, w: f64, use_markers: bool, i: usize) -> Record {
    if use_markers {
        let mut m = markers_for(w, &marker_map());
        if i % 97 == 41 {
            m[1] = None;
        }
        Record::Markers { t, markers: m }
    } else {
        Record::Width { t, width: w }
    }
}

fn calibration_file(serial: &str, cal: &GripperCalibration, rate: f64, markers: bool, rng: &mut impl Rng) -> StreamFile {
    let mut f = StreamFile::new(StreamHeader {
        stream_id: format!("calib_{serial}"),
        serial: Some(serial.into()),
        ..Default::default()
    });
    // Open hold, closing ramp, closed hold, opening ramp; six cycles.
    let (hold, ramp) = (0.5, 0.7);
    let period = 2.0 * (hold + ramp);
    let duration = 6.0 * period + hold;
    let n = (duration * rate).round() as usize;
    for i in 0..=n {
        let t = 5.0 + i as f64 / rate;
        let ph = (i as f64 / rate) % period;
        let u = if ph < hold {
            1.0
        } else if ph < hold + ramp {
            1.0 - (ph - hold) / ramp
        } else if ph < 2.0 * hold + ramp {
            0.0
        } else {
            (ph - 2.0 * hold - ramp) / ramp
        };
        let w = cal.width_min + (cal.width_max - cal.width_min) * u + rng.random_range(-0.0003..=0.0003);
        f.push(width_record(t, w, markers, i));
    }
    f
}

struct DemoArm {
    traj: PoseTrajectory,
    widths: Vec<(f64, f64)>,
}

/// Overlays a constraint violation on an otherwise well-behaved motion.
fn violate(base: &Wander, reason: Option<RejectReason>, t0: f64, duration: f64, rate: f64) -> PoseTrajectory {
    let n = (duration * rate).round() as usize + 1;
    let mid = 0.5 * duration;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let p = base.pose(t);
            let bump = |width: f64| {
                let x = (t - mid) / width;
                (-0.5 * x * x).exp()
            };
            let offset = match reason {
                Some(RejectReason::Workspace) => Vector3::new(0.0, 0.0, -0.7 * bump(0.6)),
                Some(RejectReason::Reach) => Vector3::new(0.8 * bump(0.6), 0.0, 0.0),
                Some(RejectReason::Speed) => {
                    // Cosine swipe of 0.5 m toward the midline in 0.25 s.
                    let m = 0.25;
                    let tau = (t - mid).clamp(0.0, m);
                    let w = std::f64::consts::TAU / m;
                    let peak = 2.0 * 0.5 / m;
                    Vector3::new(0.0, -0.5 * peak * (tau - (w * tau).sin() / w), 0.0)
                }
                Some(RejectReason::Acceleration) => {
                    let w = std::f64::consts::TAU * 10.0;
                    Vector3::new(0.0, 0.0, 0.006 * (w * t).sin() * bump(0.4))
                }
                _ => Vector3::zeros(),
            };
            TimedPose {
                t: t0 + t,
                pose: p.with_translation(p.translation() + offset),
            }
        })
        .collect();
    PoseTrajectory::new(MAP_FRAME, samples).expect("increasing times")
}

fn demo_arm(
    center: Vector3<f64>,
    t0: f64,
    duration: f64,
    rate: f64,
    reason: Option<RejectReason>,
    rng: &mut impl Rng,
) -> DemoArm {
    let wander = Wander::new(center, 0.05, rng);
    let traj = violate(&wander, reason, t0, duration, rate);
    let (a, w, ph) = (
        rng.random_range(0.015..0.03),
        rng.random_range(0.5..1.5),
        rng.random_range(0.0..std::f64::consts::TAU),
    );
    let widths = traj
        .samples()
        .iter()
        .map(|s| (s.t, 0.045 + a * (w * (s.t - t0) + ph).sin()))
        .collect();
    DemoArm { traj, widths }
}

fn demo_file(serial: &str, stem: &str, arm: &DemoArm, markers: bool, frames: bool) -> StreamFile {
    let mut f = StreamFile::new(StreamHeader {
        stream_id: stem.into(),
        serial: Some(serial.into()),
        frame_id: Some(MAP_FRAME.into()),
        rate_hz: None,
        ..Default::default()
    });
    for s in arm.traj.samples() {
        f.push(Record::Pose { t: s.t, pose: s.pose });
    }
    for (i, &(t, w)) in arm.widths.iter().enumerate() {
        f.push(width_record(t, w, markers, i));
        if frames {
            f.push(Record::Frame {
                t,
                frame: format!("{stem}/{i:05}.jpg"),
            });
        }
    }
    f
}

/// Writes a corpus below `out` (one directory per scene plus `model.json`,
/// `export.json` and `truth.json`) and returns the ground truth.
///
/// Each scene has one mapping recording, one calibration recording per
/// gripper, `pairs_per_scene` bimanual demos and `unpaired_per_scene` lone
/// left-gripper demos. Pairs 1, 3, 5 and 7 violate the workspace, reach,
/// speed and acceleration limits of [`corpus_model`] respectively. Scene 0
/// reports widths through finger markers, scene 1 carries camera frame
/// names.
pub fn write_corpus(out: impl AsRef<Path>, seed: u64, spec: &CorpusSpec) -> Result<CorpusTruth> {
    let out = out.as_ref();
    fs::create_dir_all(out)?;
    let violations = [
        (1, RejectReason::Workspace),
        (3, RejectReason::Reach),
        (5, RejectReason::Speed),
        (7, RejectReason::Acceleration),
    ];
    let mut scenes = Vec::with_capacity(spec.scenes);
    for s in 0..spec.scenes {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(s as u64));
        let scene_id = format!("scene_{s:02}");
        let dir = out.join(&scene_id);
        fs::create_dir_all(&dir)?;
        let markers = s == 0;
        let frames = s == 1;
        let mut recordings = Vec::new();
        let mut truth = SceneTruth {
            scene_id: scene_id.clone(),
            calibrations: Vec::new(),
            violations: BTreeMap::new(),
            pairs: Vec::new(),
            unpaired: Vec::new(),
            recordings: 0,
        };

        let mapping = Wander::new(Vector3::new(0.45, 0.0, 0.3), 0.1, &mut rng).trajectory(MAP_FRAME, 0.0, 20.0, 30.0);
        let mut mf = StreamFile::new(StreamHeader {
            stream_id: "mapping".into(),
            serial: Some(LEFT_SERIAL.into()),
            frame_id: Some(MAP_FRAME.into()),
            ..Default::default()
        });
        for p in mapping.samples() {
            mf.push(Record::Pose { t: p.t, pose: p.pose });
        }
        mf.write(dir.join("mapping.jsonl"))?;
        recordings.push(RecordingEntry {
            path: "mapping.jsonl".into(),
            serial: LEFT_SERIAL.into(),
            role: Role::Mapping,
        });

        for serial in [LEFT_SERIAL, RIGHT_SERIAL] {
            let cal = GripperCalibration::new(
                serial,
                rng.random_range(0.001..0.004),
                rng.random_range(0.074..0.079),
            )?;
            let path = format!("calib_{serial}.jsonl");
            calibration_file(serial, &cal, spec.rate, markers, &mut rng).write(dir.join(&path))?;
            recordings.push(RecordingEntry {
                path,
                serial: serial.into(),
                role: Role::Calibration,
            });
            truth.calibrations.push(cal);
        }

        let left_c = Vector3::new(0.45, 0.25, 0.2);
        let right_c = Vector3::new(0.45, -0.25, 0.2);
        for j in 0..spec.pairs_per_scene + spec.unpaired_per_scene {
            let t0 = 40.0 + 30.0 * j as f64 + rng.random_range(0.0..2.0);
            let dur = rng.random_range(6.0..10.0);
            let reason = violations.iter().find(|v| v.0 == j).map(|v| v.1);
            let lstem = format!("demo_{j:02}_L");
            let lpath = format!("{lstem}.jsonl");
            let left_reason = if j % 4 == 1 { reason } else { None };
            let left = demo_arm(left_c, t0, dur, spec.rate, left_reason, &mut rng);
            demo_file(LEFT_SERIAL, &lstem, &left, markers, frames).write(dir.join(&lpath))?;
            recordings.push(RecordingEntry {
                path: lpath.clone(),
                serial: LEFT_SERIAL.into(),
                role: Role::Demo,
            });
            if j >= spec.pairs_per_scene {
                truth.unpaired.push(lpath);
                continue;
            }
            let rstem = format!("demo_{j:02}_R");
            let rpath = format!("{rstem}.jsonl");
            let rt0 = t0 + rng.random_range(-0.3..0.3);
            let rdur = dur + rng.random_range(-0.3..0.3);
            let right_reason = if j % 4 == 3 { reason } else { None };
            let right = demo_arm(right_c, rt0, rdur, spec.rate, right_reason, &mut rng);
            demo_file(RIGHT_SERIAL, &rstem, &right, markers, frames).write(dir.join(&rpath))?;
            recordings.push(RecordingEntry {
                path: rpath.clone(),
                serial: RIGHT_SERIAL.into(),
                role: Role::Demo,
            });
            if let Some(r) = reason {
                let which = if left_reason.is_some() { &lpath } else { &rpath };
                truth.violations.insert(which.clone(), r);
            }
            truth.pairs.push((lpath, rpath));
        }

        let mut marker_maps = BTreeMap::new();
        if markers {
            marker_maps.insert(LEFT_SERIAL.to_string(), marker_map());
            marker_maps.insert(RIGHT_SERIAL.to_string(), marker_map());
        }
        truth.recordings = recordings.len();
        write_json(
            &dir.join("manifest.json"),
            &SessionManifest {
                scene_id: scene_id.clone(),
                gripper_serials: vec![LEFT_SERIAL.into(), RIGHT_SERIAL.into()],
                recordings,
                map_frame_id: MAP_FRAME.into(),
                marker_maps,
            },
        )?;
        scenes.push(truth);
    }
    write_json(&out.join("model.json"), &ModelSpec::Shared(corpus_model()))?;
    write_json(&out.join("export.json"), &corpus_export_config())?;
    let truth = CorpusTruth {
        seed,
        spec: *spec,
        scenes,
    };
    write_json(&out.join("truth.json"), &truth)?;
    Ok(truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::ate;

    #[test]
    fn sigma_gives_requested_mean_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = Normal::new(0.0, sigma_for_mean_norm(1.0)).unwrap();
        let m: f64 = (0..200_000)
            .map(|_| Vector3::<f64>::from_fn(|_, _| n.sample(&mut rng)).norm())
            .sum::<f64>()
            / 200_000.0;
        assert!((m - 1.0).abs() < 0.01, "{m}");
    }

    #[test]
    fn perturbation_levels_show_up_in_ate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gt = Wander::new(Vector3::new(0.5, 0.0, 0.2), 0.2, &mut rng).trajectory("map", 0.0, 20.0, 30.0);
        let est = perturb(&gt, 0.0061, 3.5f64.to_radians(), &mut rng);
        let r = ate(&est, &gt).unwrap();
        assert!((r.pos_mean / 0.0061 - 1.0).abs() < 0.1, "{r:?}");
        assert!((r.rot_mean / 3.5 - 1.0).abs() < 0.1, "{}", r.rot_mean);
    }

    #[test]
    fn corpus_shape() {
        let dir = tempfile::tempdir().unwrap();
        let t = write_corpus(dir.path(), 5, &CorpusSpec::default()).unwrap();
        assert_eq!(t.scenes.len(), 3);
        assert!(t.scenes.iter().all(|s| s.recordings == 20));
        assert!(t.scenes.iter().all(|s| s.violations.len() == 4));
        assert!(dir.path().join("scene_00/manifest.json").exists());
    }
}
