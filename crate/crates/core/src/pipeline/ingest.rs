use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::calib::{calibrate_gripper, marker_widths, GripperCalibration, MarkerMap};
use super::kinematics::{kinematic_filter, ModelSpec, Verdict};
use super::pairing::{pair_recordings, RecordingSpan};
use crate::par::{self, Parallelism};
use crate::se3::{inter_gripper_pose, Pose, PoseTrajectory};
use crate::stream::{Sample, StreamFile, TimedStream};
use crate::sync::FrameRef;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Mapping,
    Calibration,
    Demo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingEntry {
    /// Relative to the scene directory.
    pub path: String,
    pub serial: String,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionManifest {
    pub scene_id: String,
    /// One serial for single-arm scenes; `[left, right]` for bimanual ones.
    pub gripper_serials: Vec<String>,
    pub recordings: Vec<RecordingEntry>,
    pub map_frame_id: String,
    /// Marker pixel distance to width, per serial. Needed only for
    /// recordings that carry markers instead of widths.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub marker_maps: BTreeMap<String, MarkerMap>,
}

impl SessionManifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref())?;
        let m: SessionManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
            location: path.as_ref().display().to_string(),
            message: e.to_string(),
        })?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidManifest(format!("{}: {m}", self.scene_id)));
        if self.scene_id.is_empty() {
            return Err(Error::InvalidManifest("empty scene_id".into()));
        }
        let serials: BTreeSet<&str> = self.gripper_serials.iter().map(String::as_str).collect();
        if serials.len() != self.gripper_serials.len() {
            return bad("duplicate gripper serials".into());
        }
        if !(1..=2).contains(&serials.len()) {
            return bad(format!("expected 1 or 2 grippers, got {}", serials.len()));
        }
        let mapping = self.recordings.iter().filter(|r| r.role == Role::Mapping).count();
        if mapping != 1 {
            return bad(format!("expected exactly one mapping recording, got {mapping}"));
        }
        let mut paths = BTreeSet::new();
        let mut calib = BTreeSet::new();
        for r in &self.recordings {
            if !serials.contains(r.serial.as_str()) {
                return bad(format!("`{}` uses unknown serial `{}`", r.path, r.serial));
            }
            if !paths.insert(r.path.as_str()) {
                return bad(format!("`{}` listed twice", r.path));
            }
            if r.role == Role::Calibration && !calib.insert(r.serial.as_str()) {
                return bad(format!("more than one calibration recording for `{}`", r.serial));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub id: String,
    pub scene_id: String,
    /// Left first for bimanual episodes.
    pub serials: Vec<String>,
    pub sources: Vec<String>,
    /// Capture-time trajectories in the map frame, one per arm.
    pub trajectories: Vec<PoseTrajectory>,
    /// Capture-time raw widths, one per arm.
    pub widths: Vec<TimedStream<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<TimedStream<FrameRef>>,
    /// `None` until filtered.
    #[serde(default)]
    pub verdict: Option<Verdict>,
}

impl Episode {
    /// Interval covered by every trajectory and width stream.
    pub fn common_span(&self) -> Option<(f64, f64)> {
        let spans = self
            .trajectories
            .iter()
            .map(|t| Some((t.first()?.t, t.last()?.t)))
            .chain(self.widths.iter().map(|w| w.span()));
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for s in spans {
            let (a, b) = s?;
            lo = lo.max(a);
            hi = hi.min(b);
        }
        (lo <= hi).then_some((lo, hi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordingStatus {
    Mapping,
    Calibration,
    Paired,
    Single,
    Unpaired,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingOutcome {
    pub scene_id: String,
    pub path: String,
    pub serial: String,
    pub role: Role,
    pub status: RecordingStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Run metadata. The only field allowed to differ between identical runs is
/// `generated_at`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    /// Unix seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<f64>,
}

impl Meta {
    pub fn now() -> Self {
        let t = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .ok();
        Self {
            tool: concat!("umi ", env!("CARGO_PKG_VERSION")).into(),
            generated_at: t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeSet {
    /// Scene id, then serial.
    pub calibrations: BTreeMap<String, BTreeMap<String, GripperCalibration>>,
    pub recordings: Vec<RecordingOutcome>,
    pub episodes: Vec<Episode>,
    #[serde(default)]
    pub meta: Meta,
}

impl EpisodeSet {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref())?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            location: path.as_ref().display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        fs::write(path, s)?;
        Ok(())
    }

    pub fn calibration(&self, scene_id: &str, serial: &str) -> Option<&GripperCalibration> {
        self.calibrations.get(scene_id)?.get(serial)
    }
}

/// Relative pose of the right gripper seen from the left one at each left
/// timestamp covered by the right trajectory.
pub fn inter_gripper_stream(left: &PoseTrajectory, right: &PoseTrajectory) -> Result<TimedStream<Pose>> {
    if left.frame_id() != right.frame_id() {
        return Err(Error::FrameMismatch {
            left: left.frame_id().into(),
            right: right.frame_id().into(),
        });
    }
    let r = TimedStream::from_trajectory("right", right);
    let samples = left
        .samples()
        .iter()
        .filter_map(|s| {
            let rp = r.sample_at(s.t).ok()?;
            Some(Sample {
                t: s.t,
                value: inter_gripper_pose(&s.pose, &rp),
            })
        })
        .collect();
    TimedStream::new("inter_gripper", 0.0, samples)
}

fn to_capture_time<T: Clone>(s: TimedStream<T>) -> Result<TimedStream<T>> {
    let l = s.latency();
    s.shifted(-l).with_latency(0.0)
}

fn raw_widths(file: &StreamFile, marker_map: Option<&MarkerMap>) -> std::result::Result<TimedStream<f64>, String> {
    let s = if !file.widths.is_empty() {
        file.width_stream().map_err(|e| e.to_string())?
    } else if !file.markers.is_empty() {
        let map = marker_map.ok_or("markers present but no marker map for this serial")?;
        let m = file.marker_stream().map_err(|e| e.to_string())?;
        marker_widths(&m, map).map_err(|e| e.to_string())?.widths
    } else {
        return Err("no width or marker records".into());
    };
    if s.len() < 2 {
        return Err("fewer than 2 width samples".into());
    }
    to_capture_time(s).map_err(|e| e.to_string())
}

struct Demo {
    path: String,
    serial: String,
    traj: PoseTrajectory,
    widths: TimedStream<f64>,
    frames: Option<TimedStream<FrameRef>>,
}

enum Loaded {
    Mapping,
    Calibration(GripperCalibration),
    Demo(Box<Demo>),
}

fn load(dir: &Path, m: &SessionManifest, r: &RecordingEntry) -> std::result::Result<Loaded, String> {
    let file = StreamFile::read(dir.join(&r.path)).map_err(|e| e.to_string())?;
    if let Some(s) = &file.header.serial {
        if s != &r.serial {
            return Err(format!("header serial `{s}` does not match manifest serial `{}`", r.serial));
        }
    }
    match r.role {
        Role::Mapping => {
            if let Some(f) = &file.header.frame_id {
                if f != &m.map_frame_id {
                    return Err(format!("map frame `{f}` does not match `{}`", m.map_frame_id));
                }
            }
            Ok(Loaded::Mapping)
        }
        Role::Calibration => {
            let w = raw_widths(&file, m.marker_maps.get(&r.serial))?;
            calibrate_gripper(&r.serial, &w)
                .map(Loaded::Calibration)
                .map_err(|e| e.to_string())
        }
        Role::Demo => {
            let frame = file.header.frame_id.as_deref().unwrap_or("");
            if frame != m.map_frame_id {
                return Err(format!(
                    "trajectory frame `{frame}` is not the map frame `{}`",
                    m.map_frame_id
                ));
            }
            if file.poses.len() < 2 {
                return Err("fewer than 2 pose samples".into());
            }
            let traj = file
                .pose_stream()
                .and_then(|s| s.to_trajectory(&m.map_frame_id))
                .map_err(|e| e.to_string())?;
            let widths = raw_widths(&file, m.marker_maps.get(&r.serial))?;
            let frames = if file.frames.is_empty() {
                None
            } else {
                Some(
                    file.frame_stream()
                        .and_then(to_capture_time)
                        .map_err(|e| e.to_string())?,
                )
            };
            Ok(Loaded::Demo(Box::new(Demo {
                path: r.path.clone(),
                serial: r.serial.clone(),
                traj,
                widths,
                frames,
            })))
        }
    }
}

fn stem(path: &str) -> &str {
    Path::new(path)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(path)
}

/// Loads one scene directory: calibrates grippers, pairs demonstrations and
/// accounts for every recording in the manifest.
pub fn ingest_scene(dir: impl AsRef<Path>, parallelism: Parallelism) -> Result<EpisodeSet> {
    let dir = dir.as_ref();
    let m = SessionManifest::read(dir.join("manifest.json"))?;
    let loaded = par::map(parallelism, &m.recordings, |r| load(dir, &m, r));

    let outcome = |r: &RecordingEntry, status, episode: Option<String>, detail: Option<String>| RecordingOutcome {
        scene_id: m.scene_id.clone(),
        path: r.path.clone(),
        serial: r.serial.clone(),
        role: r.role,
        status,
        episode,
        detail,
    };

    let mut outcomes: Vec<Option<RecordingOutcome>> = vec![None; m.recordings.len()];
    let mut cals = BTreeMap::new();
    let mut demos: BTreeMap<String, (usize, Demo)> = BTreeMap::new();
    for (i, (r, l)) in m.recordings.iter().zip(loaded).enumerate() {
        match l {
            Ok(Loaded::Mapping) => outcomes[i] = Some(outcome(r, RecordingStatus::Mapping, None, None)),
            Ok(Loaded::Calibration(c)) => {
                let detail = format!("width range [{}, {}]", c.width_min, c.width_max);
                cals.insert(r.serial.clone(), c);
                outcomes[i] = Some(outcome(r, RecordingStatus::Calibration, None, Some(detail)));
            }
            Ok(Loaded::Demo(d)) => {
                demos.insert(r.path.clone(), (i, *d));
            }
            Err(reason) => {
                warn!("{}/{}: rejected: {reason}", m.scene_id, r.path);
                outcomes[i] = Some(outcome(r, RecordingStatus::Rejected, None, Some(reason)));
            }
        }
    }

    let mut episodes = Vec::new();
    let mut assign = |paths: &[&str], demos: &BTreeMap<String, (usize, Demo)>, outcomes: &mut Vec<Option<RecordingOutcome>>| {
        let id = format!(
            "{}/{}",
            m.scene_id,
            paths.iter().map(|p| stem(p)).collect::<Vec<_>>().join("+")
        );
        let parts: Vec<&Demo> = paths.iter().map(|p| &demos[*p].1).collect();
        let status = if paths.len() == 2 {
            RecordingStatus::Paired
        } else {
            RecordingStatus::Single
        };
        for p in paths {
            let (i, _) = demos[*p];
            outcomes[i] = Some(outcome(&m.recordings[i], status, Some(id.clone()), None));
        }
        episodes.push(Episode {
            id,
            scene_id: m.scene_id.clone(),
            serials: parts.iter().map(|d| d.serial.clone()).collect(),
            sources: paths.iter().map(|p| p.to_string()).collect(),
            trajectories: parts.iter().map(|d| d.traj.clone()).collect(),
            widths: parts.iter().map(|d| d.widths.clone()).collect(),
            frames: parts[0].frames.clone(),
            verdict: None,
        });
    };

    if m.gripper_serials.len() == 2 {
        let spans: Vec<RecordingSpan> = demos
            .values()
            .map(|(_, d)| RecordingSpan {
                path: d.path.clone(),
                serial: d.serial.clone(),
                start: d.traj.first().map_or(0.0, |s| s.t),
                end: d.traj.last().map_or(0.0, |s| s.t),
            })
            .collect();
        let pairing = pair_recordings(&m.gripper_serials[0], &m.gripper_serials[1], &spans)?;
        for (l, r) in &pairing.pairs {
            assign(&[l.as_str(), r.as_str()], &demos, &mut outcomes);
        }
        for p in &pairing.unpaired {
            let (i, _) = demos[p];
            outcomes[i] = Some(outcome(
                &m.recordings[i],
                RecordingStatus::Unpaired,
                None,
                Some("no overlapping recording from the other gripper".into()),
            ));
        }
    } else {
        let mut order: Vec<&Demo> = demos.values().map(|(_, d)| d).collect();
        order.sort_by(|a, b| {
            let (ta, tb) = (a.traj.first().map_or(0.0, |s| s.t), b.traj.first().map_or(0.0, |s| s.t));
            ta.total_cmp(&tb).then_with(|| a.path.cmp(&b.path))
        });
        let paths: Vec<String> = order.iter().map(|d| d.path.clone()).collect();
        for p in &paths {
            assign(&[p.as_str()], &demos, &mut outcomes);
        }
    }

    let recordings: Vec<RecordingOutcome> = outcomes
        .into_iter()
        .map(|o| o.expect("every recording is assigned an outcome"))
        .collect();
    info!(
        "{}: {} recordings, {} episodes, {} calibrations",
        m.scene_id,
        recordings.len(),
        episodes.len(),
        cals.len()
    );
    let mut calibrations = BTreeMap::new();
    calibrations.insert(m.scene_id.clone(), cals);
    Ok(EpisodeSet {
        calibrations,
        recordings,
        episodes,
        meta: Meta::default(),
    })
}

/// Ingests several scenes; results are concatenated in argument order.
pub fn ingest_scenes(dirs: &[PathBuf], parallelism: Parallelism) -> Result<EpisodeSet> {
    let sets = par::try_map(parallelism, dirs, |d| ingest_scene(d, parallelism))?;
    let mut out = EpisodeSet::default();
    for s in sets {
        for scene in s.calibrations.keys() {
            if out.calibrations.contains_key(scene) {
                return Err(Error::InvalidManifest(format!("scene `{scene}` ingested twice")));
            }
        }
        out.calibrations.extend(s.calibrations);
        out.recordings.extend(s.recordings);
        out.episodes.extend(s.episodes);
    }
    Ok(out)
}

/// Sets the kinematic verdict of every episode. Verdicts depend only on the
/// episode itself.
pub fn filter_episodes(set: &mut EpisodeSet, models: &ModelSpec, parallelism: Parallelism) -> Result<()> {
    models.validate()?;
    let verdicts = par::try_map(parallelism, &set.episodes, |e| kinematic_filter(&e.trajectories, models))?;
    for (e, v) in set.episodes.iter_mut().zip(verdicts) {
        e.verdict = Some(v);
    }
    Ok(())
}
