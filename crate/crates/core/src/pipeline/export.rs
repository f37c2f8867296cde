use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};

use super::ingest::{Episode, EpisodeSet, Meta};
use super::kinematics::Verdict;
use crate::par::{self, Parallelism};
use crate::se3::{inter_gripper_pose, ActionRepr, Pose};
use crate::stream::{Sample, TimedStream};
use crate::sync::{align_observations, AlignConfig, Alignment, FrameRef};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportConfig {
    /// Sample rate in Hz.
    pub freq: f64,
    pub obs_horizon: usize,
    pub action_horizon: usize,
    pub repr: ActionRepr,
    /// Frame id of a calibrated global frame. Required for absolute actions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global_frame: Option<String>,
}

impl ExportConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.freq.is_finite() && self.freq > 0.0) {
            return Err(Error::InvalidConfig(format!("freq {} must be > 0", self.freq)));
        }
        if self.obs_horizon == 0 || self.action_horizon == 0 {
            return Err(Error::InvalidConfig("horizons must be >= 1".into()));
        }
        if self.repr == ActionRepr::Absolute && self.global_frame.is_none() {
            return Err(Error::AbsoluteWithoutFrame);
        }
        Ok(())
    }

    /// Time covered by one sample's observation history plus its actions.
    pub fn window(&self) -> f64 {
        (self.obs_horizon - 1 + self.action_horizon - 1) as f64 / self.freq
    }

    /// Samples that fit in `duration` seconds.
    pub fn sample_count(&self, duration: f64) -> usize {
        let w = self.window();
        if duration + 1e-9 < w {
            return 0;
        }
        ((duration - w) * self.freq + 1e-9).floor() as usize + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSample {
    /// Poses relative to `anchor`, oldest first; the last is the identity.
    pub ee_history: Vec<Pose>,
    pub width_history: Vec<f64>,
    /// Absolute pose at `t_obs` in the map frame.
    pub anchor: Pose,
    /// Future poses at `t_obs + k / freq` in the configured representation.
    pub actions: Vec<Pose>,
    pub action_widths: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSample {
    pub episode: String,
    pub index: usize,
    pub t_obs: f64,
    pub frame_ref: FrameRef,
    pub arms: Vec<ArmSample>,
    /// Right gripper seen from the left, at the history times (bimanual
    /// only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inter_gripper: Vec<Pose>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportStatus {
    Exported,
    Rejected,
    Unfiltered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeExport {
    pub id: String,
    pub status: ExportStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    pub samples: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetCounts {
    pub episodes: usize,
    pub exported: usize,
    pub rejected: usize,
    pub unfiltered: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub config: ExportConfig,
    pub episodes: Vec<EpisodeExport>,
    pub counts: DatasetCounts,
    #[serde(default)]
    pub meta: Meta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub samples: Vec<DatasetSample>,
}

impl Dataset {
    pub const MANIFEST: &'static str = "manifest.json";
    pub const SAMPLES: &'static str = "samples.jsonl";

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut m = serde_json::to_string_pretty(&self.manifest)?;
        m.push('\n');
        fs::write(dir.join(Self::MANIFEST), m)?;
        let mut w = BufWriter::new(File::create(dir.join(Self::SAMPLES))?);
        for s in &self.samples {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mpath = dir.join(Self::MANIFEST);
        let manifest: DatasetManifest =
            serde_json::from_str(&fs::read_to_string(&mpath)?).map_err(|e| Error::Parse {
                location: mpath.display().to_string(),
                message: e.to_string(),
            })?;
        let spath = dir.join(Self::SAMPLES);
        let mut samples = Vec::new();
        for (n, line) in BufReader::new(File::open(&spath)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            samples.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
                location: format!("{}:{}", spath.display(), n + 1),
                message: e.to_string(),
            })?);
        }
        Ok(Self { manifest, samples })
    }
}

fn export_episode(ep: &Episode, set: &EpisodeSet, cfg: &ExportConfig) -> Result<(Vec<DatasetSample>, usize)> {
    if let (ActionRepr::Absolute, Some(g)) = (cfg.repr, &cfg.global_frame) {
        for t in &ep.trajectories {
            if t.frame_id() != g {
                return Err(Error::FrameMismatch {
                    left: t.frame_id().into(),
                    right: g.clone(),
                });
            }
        }
    }
    let widths: Vec<TimedStream<f64>> = ep
        .serials
        .iter()
        .zip(&ep.widths)
        .map(|(serial, w)| {
            let cal = set
                .calibration(&ep.scene_id, serial)
                .ok_or_else(|| Error::MissingCalibration(format!("{}/{serial}", ep.scene_id)))?;
            Ok(w.map(|&x| cal.apply(x)))
        })
        .collect::<Result<_>>()?;
    let Some((t0, t1)) = ep.common_span() else {
        return Ok((Vec::new(), 0));
    };
    let n = cfg.sample_count(t1 - t0);
    if n == 0 {
        return Ok((Vec::new(), 0));
    }
    let first = cfg.obs_horizon - 1;
    let t_obs: Vec<f64> = (0..n).map(|k| t0 + (first + k) as f64 / cfg.freq).collect();
    let refs: Vec<Sample<FrameRef>> = t_obs
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let value = ep
                .frames
                .as_ref()
                .and_then(|f| f.nearest_index(t).map(|i| f.samples()[i].value.clone()))
                .unwrap_or_else(|| format!("{}#{k}", ep.id));
            Sample { t, value }
        })
        .collect();
    let frames = TimedStream::new(format!("{}/frames", ep.id), 0.0, refs)?.with_rate(cfg.freq)?;
    let align_cfg = AlignConfig {
        obs_horizon: cfg.obs_horizon,
        freq: cfg.freq,
    };
    let ee: Vec<TimedStream<Pose>> = ep
        .trajectories
        .iter()
        .map(|t| TimedStream::from_trajectory(t.frame_id(), t))
        .collect();
    let aligned: Vec<Alignment> = ee
        .iter()
        .zip(&widths)
        .map(|(e, w)| align_observations(&frames, e, w, &align_cfg))
        .collect::<Result<_>>()?;

    let mut out = Vec::with_capacity(n);
    let mut skipped = 0;
    'frames: for (k, &t) in t_obs.iter().enumerate() {
        let mut arms = Vec::with_capacity(aligned.len());
        for (arm, a) in aligned.iter().enumerate() {
            let Some(tuple) = a.tuples.iter().find(|x| x.t_obs == t) else {
                skipped += 1;
                continue 'frames;
            };
            let mut poses = Vec::with_capacity(cfg.action_horizon);
            let mut aw = Vec::with_capacity(cfg.action_horizon);
            for j in 0..cfg.action_horizon {
                let ta = t0 + (first + k + j) as f64 / cfg.freq;
                match (ee[arm].sample_at(ta), widths[arm].sample_at(ta)) {
                    (Ok(p), Ok(w)) => {
                        poses.push(p);
                        aw.push(w);
                    }
                    _ => {
                        skipped += 1;
                        continue 'frames;
                    }
                }
            }
            arms.push(ArmSample {
                ee_history: tuple.ee_history.poses(),
                width_history: tuple.width_history.iter().map(|w| w.1).collect(),
                anchor: tuple.ee_anchor,
                actions: cfg.repr.encode(&poses, &tuple.ee_anchor),
                action_widths: aw,
            });
        }
        let inter_gripper = if arms.len() == 2 {
            arms[0]
                .ee_history
                .iter()
                .zip(&arms[1].ee_history)
                .map(|(l, r)| inter_gripper_pose(&arms[0].anchor.compose(l), &arms[1].anchor.compose(r)))
                .collect()
        } else {
            Vec::new()
        };
        out.push(DatasetSample {
            episode: ep.id.clone(),
            index: out.len(),
            t_obs: t,
            frame_ref: aligned[0]
                .tuples
                .iter()
                .find(|x| x.t_obs == t)
                .map(|x| x.frame_ref.clone())
                .unwrap_or_default(),
            arms,
            inter_gripper,
        });
    }
    Ok((out, skipped))
}

/// Resamples every accepted episode into fixed-rate observation/action
/// samples. Rejected and unfiltered episodes are listed in the manifest with
/// no samples.
pub fn export_dataset(set: &EpisodeSet, cfg: &ExportConfig, parallelism: Parallelism) -> Result<Dataset> {
    cfg.validate()?;
    let results = par::try_map(parallelism, &set.episodes, |ep| match &ep.verdict {
        Some(Verdict::Accepted) => export_episode(ep, set, cfg).map(Some),
        _ => Ok(None),
    })?;
    let mut episodes = Vec::with_capacity(set.episodes.len());
    let mut samples = Vec::new();
    let mut counts = DatasetCounts {
        episodes: set.episodes.len(),
        ..Default::default()
    };
    for (ep, r) in set.episodes.iter().zip(results) {
        let (status, n, skipped) = match (&ep.verdict, r) {
            (_, Some((s, skipped))) => {
                let n = s.len();
                samples.extend(s);
                counts.exported += 1;
                (ExportStatus::Exported, n, skipped)
            }
            (Some(_), None) => {
                counts.rejected += 1;
                (ExportStatus::Rejected, 0, 0)
            }
            (None, None) => {
                counts.unfiltered += 1;
                (ExportStatus::Unfiltered, 0, 0)
            }
        };
        episodes.push(EpisodeExport {
            id: ep.id.clone(),
            status,
            verdict: ep.verdict.clone(),
            samples: n,
            skipped,
        });
    }
    counts.samples = samples.len();
    info!(
        "exported {} samples from {}/{} episodes",
        counts.samples, counts.exported, counts.episodes
    );
    Ok(Dataset {
        manifest: DatasetManifest {
            config: cfg.clone(),
            episodes,
            counts,
            meta: Meta::default(),
        },
        samples,
    })
}
