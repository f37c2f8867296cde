//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Run with `cargo test -p umi-cli --test acceptance`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use umi_core::eval::{ate, inter_gripper_rpe};
use umi_core::latency::{
    camera_latency, estimate_lag, exec_latency, generate_probe, half_rtt, proprio_latency, ProbeParams, QrDecode,
};
use umi_core::par::Parallelism;
use umi_core::pipeline::{
    filter_episodes, ingest_scenes, mirror_reflect, EpisodeSet, ImageBuffer, KinematicModel, ModelSpec, Rect,
    RecordingStatus, RejectReason, Role, SessionManifest, Verdict,
};
use umi_core::schedule::{
    plan_dispatch, to_absolute_targets, trim_outdated, ActionChunk, ActionStep, Actuator,
};
use umi_core::se3::{accumulate_deltas, ActionRepr, Pose, PoseTrajectory};
use umi_core::sim::{simulate, toss_profile, SimConfig, TossParams};
use umi_core::stream::{Sample, TimedStream};
use umi_core::synth::{corpus_model, perturb, write_corpus, CorpusSpec, Wander};
use umi_core::LatencyProfile;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn random_pose(rng: &mut impl Rng) -> Pose {
    let t = Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0));
    let r = Vector3::from_fn(|_, _| rng.random_range(-1.8..1.8));
    Pose::from_rotation_vector(t, r)
}

fn pose_diff(a: &Pose, b: &Pose) -> f64 {
    let (ma, mb) = (a.to_matrix(), b.to_matrix());
    (0..3)
        .flat_map(|i| (0..4).map(move |j| (i, j)))
        .map(|(i, j)| (ma[i][j] - mb[i][j]).abs())
        .fold(0.0, f64::max)
}

fn frame_corpus() -> Vec<(Vec<Pose>, Pose, Pose)> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (0..1000)
        .map(|_| {
            let n = rng.random_range(1..=64);
            let poses = (0..n).map(|_| random_pose(&mut rng)).collect();
            (poses, random_pose(&mut rng), random_pose(&mut rng))
        })
        .collect()
}

fn frame_invariance() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut absolute_invariant = 0;
    for (poses, anchor, g) in frame_corpus() {
        let moved: Vec<Pose> = poses.iter().map(|p| g.compose(p)).collect();
        let moved_anchor = g.compose(&anchor);
        for repr in [ActionRepr::RelativeTrajectory, ActionRepr::Delta] {
            let a = repr.encode(&poses, &anchor);
            let b = repr.encode(&moved, &moved_anchor);
            worst = a.iter().zip(&b).map(|(x, y)| pose_diff(x, y)).fold(worst, f64::max);
        }
        let abs_orig = ActionRepr::Absolute.encode(&poses, &anchor);
        let abs_moved = ActionRepr::Absolute.encode(&moved, &moved_anchor);
        let shift = abs_orig.iter().zip(&abs_moved).map(|(x, y)| pose_diff(x, y)).fold(0.0, f64::max);
        let by_g = abs_orig
            .iter()
            .zip(&abs_moved)
            .map(|(x, y)| pose_diff(&g.compose(x), y))
            .fold(0.0, f64::max);
        check(by_g < 1e-9, format!("absolute encoding is not moved by G ({by_g:e})"))?;
        if shift < 1e-6 {
            absolute_invariant += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst <= 1e-9, format!("relative/delta deviation {worst:e}"))?;
    check(absolute_invariant == 0, format!("{absolute_invariant} absolute encodings unchanged"))?;
    check(secs < 5.0, format!("took {secs:.2} s"))?;
    Ok(format!("max deviation {worst:.1e}, {secs:.2} s"))
}

fn delta_round_trip() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (poses, _, _) in frame_corpus() {
        if poses.len() < 2 {
            continue;
        }
        let traj = PoseTrajectory::from_parts("w", &(0..poses.len()).map(|i| i as f64).collect::<Vec<_>>(), &poses)
            .map_err(|e| e.to_string())?;
        let back = accumulate_deltas(&traj.to_delta().map_err(|e| e.to_string())?, poses[0]);
        check(back.len() == poses.len(), "length changed")?;
        worst = back.iter().zip(&poses).map(|(x, y)| pose_diff(x, y)).fold(worst, f64::max);
        checked += 1;
    }
    check(worst <= 1e-9, format!("deviation {worst:e}"))?;
    Ok(format!("{checked} trajectories, max deviation {worst:.1e}"))
}

/// Pearson correlation over a 1 ms grid using the analytic probe.
fn brute_force_lag(meta: &umi_core::latency::ProbeMeta, measured: &[(f64, f64)], max_lag: f64) -> f64 {
    let ys: Vec<f64> = measured.iter().map(|m| m.1).collect();
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let steps = (max_lag / 0.001).round() as usize;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 0..=steps {
        let lag = i as f64 * 0.001;
        let xs: Vec<f64> = measured.iter().map(|m| meta.value_at(m.0 - lag)).collect();
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (x, y) in xs.iter().zip(&ys) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
        }
        let r = sxy / (sxx * syy).sqrt();
        if r > best.0 {
            best = (r, lag);
        }
    }
    best.1
}

fn lag_recovery() -> Outcome {
    let start = Instant::now();
    let params = ProbeParams::chirp(0.5, 3.0, 10.0, 100.0);
    let probe = generate_probe(&params).map_err(|e| e.to_string())?;
    let max_lag = 0.4;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, 0.02 * params.amplitude).unwrap();
    let mut worst: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    for _ in 0..50 {
        let lag: f64 = rng.random_range(0.0..0.3);
        let samples: Vec<Sample<f64>> = (0..1000)
            .map(|k| {
                let t = k as f64 / 100.0;
                Sample {
                    t,
                    value: probe.meta.value_at(t - lag) + noise.sample(&mut rng),
                }
            })
            .collect();
        let window: Vec<(f64, f64)> = samples
            .iter()
            .filter(|s| s.t >= max_lag - 1e-12)
            .map(|s| (s.t, s.value))
            .collect();
        let measured = TimedStream::new("measured", 0.0, samples).map_err(|e| e.to_string())?;
        let est = estimate_lag(&probe, &measured, max_lag, 0.001).map_err(|e| e.to_string())?;
        worst = worst.max((est.lag - lag).abs());
        let oracle = brute_force_lag(&probe.meta, &window, max_lag);
        worst_oracle = worst_oracle.max((oracle - est.grid_lag).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst <= 0.005, format!("lag error {:.2} ms", worst * 1e3))?;
    check(worst_oracle <= 0.001 + 1e-9, format!("oracle disagreement {:.2} ms", worst_oracle * 1e3))?;
    check(secs < 30.0, format!("took {secs:.2} s"))?;
    Ok(format!(
        "max error {:.2} ms, oracle gap {:.0} ms, {secs:.2} s",
        worst * 1e3,
        worst_oracle * 1e3
    ))
}

fn latency_arithmetic() -> Outcome {
    let cases = [(10.250, 10.100, 0.020, 0.130), (3.5, 3.4, 0.0, 0.1), (100.0, 99.87, 0.016, 0.114)];
    for (recv, display, l_display, expected) in cases {
        let c = camera_latency(&[QrDecode { t_recv: recv, t_display: display }], l_display)
            .map_err(|e| e.to_string())?;
        check(c.latency == recv - display - l_display, "camera formula")?;
        check((c.latency - expected).abs() < 1e-9, format!("camera {} vs {expected}", c.latency))?;
    }
    for (robot, recv, expected) in [(7.000, 7.004, 0.004), (1.25, 1.25, 0.0)] {
        let l = proprio_latency(robot, recv).map_err(|e| e.to_string())?;
        check(l == recv - robot && (l - expected).abs() < 1e-12, "proprioception formula")?;
    }
    check(half_rtt(0.012).map_err(|e| e.to_string())? == 0.006, "half round trip")?;
    for (e2e, obs, expected) in [(0.145, 0.005, 0.140), (0.230, 0.130, 0.100)] {
        let l = exec_latency(e2e, obs).map_err(|e| e.to_string())?;
        check(l == e2e - obs && (l - expected).abs() < 1e-12, "execution formula")?;
    }
    check(exec_latency(0.1, 0.2).is_err(), "negative execution latency accepted")?;
    Ok("camera 10.250/10.100/0.020 -> 0.130 s".into())
}

fn simulation_efficacy() -> Outcome {
    let start = Instant::now();
    // Camera 130 ms, proprioception 5 ms, robot execution 100 ms, gripper
    // execution 40 ms.
    let profile = LatencyProfile::new(0.130, 0.005, 0.040, 0.100).map_err(|e| e.to_string())?;
    let reference = toss_profile(&TossParams::default()).map_err(|e| e.to_string())?;
    let run = |cfg: &SimConfig| simulate(&reference, cfg).map_err(|e| e.to_string());
    let matched = SimConfig::matched(profile, 20.0);
    let ablated = SimConfig::ablated(profile, 20.0);
    let m = run(&matched)?;
    let a = run(&ablated)?;
    check(run(&matched)? == m && run(&ablated)? == a, "runs are not reproducible")?;
    let secs = start.elapsed().as_secs_f64();
    let summary = format!(
        "matched {:.1}/{:.1} ms, ablated {:.1}/{:.1} ms (misalignment/release), {secs:.2} s",
        m.temporal_misalignment * 1e3,
        m.release_time_error * 1e3,
        a.temporal_misalignment * 1e3,
        a.release_time_error * 1e3
    );
    check(m.temporal_misalignment <= 0.050, format!("matched misalignment; {summary}"))?;
    check(m.release_time_error <= 0.050, format!("matched release error; {summary}"))?;
    check(a.temporal_misalignment >= 0.200, format!("ablated misalignment; {summary}"))?;
    check(a.release_time_error >= 0.060, format!("ablated release error; {summary}"))?;
    check(
        a.temporal_misalignment >= 3.0 * m.temporal_misalignment,
        format!("ratio; {summary}"),
    )?;
    check(secs < 10.0, format!("took {secs:.2} s"))?;
    Ok(summary)
}

fn ate_rpe_calibration() -> Outcome {
    let pos = 0.0061;
    let rot = 3.5f64.to_radians();
    let within = |got: f64, want: f64| (got / want - 1.0).abs() <= 0.2;
    let (mut worst_pos, mut worst_rot, mut worst_rpe_pos, mut worst_rpe_rot) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let rel = |got: f64, want: f64| (got / want - 1.0).abs();
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lg = Wander::new(Vector3::new(0.5, 0.25, 0.2), 0.2, &mut rng).trajectory("map", 0.0, 20.0, 30.0);
        let rg = Wander::new(Vector3::new(0.5, -0.25, 0.2), 0.2, &mut rng).trajectory("map", 0.0, 20.0, 30.0);

        let est = perturb(&lg, pos, rot, &mut rng);
        let r = ate(&est, &lg).map_err(|e| e.to_string())?;
        check(within(r.pos_mean, pos), format!("seed {seed}: ATE {:.2} mm", r.pos_mean * 1e3))?;
        check(within(r.rot_mean, 3.5), format!("seed {seed}: rotation {:.2} deg", r.rot_mean))?;
        worst_pos = worst_pos.max(rel(r.pos_mean, pos));
        worst_rot = worst_rot.max(rel(r.rot_mean, 3.5));

        // Independent errors on both grippers combine in quadrature.
        let rpe = inter_gripper_rpe(&perturb(&lg, pos, 0.0, &mut rng), &perturb(&rg, pos, 0.0, &mut rng), &lg, &rg)
            .map_err(|e| e.to_string())?;
        let want = pos * 2f64.sqrt();
        check(within(rpe.pos_mean, want), format!("seed {seed}: RPE {:.2} mm", rpe.pos_mean * 1e3))?;
        worst_rpe_pos = worst_rpe_pos.max(rel(rpe.pos_mean, want));
        let rpe = inter_gripper_rpe(&perturb(&lg, 0.0, rot, &mut rng), &perturb(&rg, 0.0, rot, &mut rng), &lg, &rg)
            .map_err(|e| e.to_string())?;
        let want = 3.5 * 2f64.sqrt();
        check(within(rpe.rot_mean, want), format!("seed {seed}: RPE {:.2} deg", rpe.rot_mean))?;
        worst_rpe_rot = worst_rpe_rot.max(rel(rpe.rot_mean, want));

        let g = random_pose(&mut rng);
        let exact = ate(&lg.transformed(&g, "map"), &lg).map_err(|e| e.to_string())?;
        check(exact.pos_rmse <= 1e-9, format!("seed {seed}: aligned G*gt ATE {:e}", exact.pos_rmse))?;
    }
    Ok(format!(
        "worst relative deviation: ATE {:.1}%/{:.1}%, RPE {:.1}%/{:.1}%",
        worst_pos * 100.0,
        worst_rot * 100.0,
        worst_rpe_pos * 100.0,
        worst_rpe_rot * 100.0
    ))
}

/// Per-sample reimplementation of the kinematic limits.
fn brute_force_verdict(trajs: &[PoseTrajectory], m: &KinematicModel) -> Verdict {
    if let Some(arm) = trajs.iter().position(|t| t.len() < 3) {
        return Verdict::Rejected {
            reason: RejectReason::InsufficientData,
            arm,
            index: None,
            value: None,
        };
    }
    let base = m.base_pose.to_matrix();
    let r = Matrix3::from_fn(|i, j| base[i][j]);
    let b = Vector3::new(base[0][3], base[1][3], base[2][3]);
    let mut found: Vec<Vec<Option<(usize, f64)>>> = vec![Vec::new(); 4];
    for traj in trajs {
        let s = traj.samples();
        let world: Vec<Vector3<f64>> = s
            .iter()
            .map(|p| {
                let a = p.pose.to_array();
                Vector3::new(a[0], a[1], a[2])
            })
            .collect();
        let local: Vec<Vector3<f64>> = world.iter().map(|p| r.transpose() * (p - b)).collect();
        let mut reach = None;
        let mut work = None;
        let mut speed = None;
        let mut accel = None;
        let n = s.len();
        for i in 0..n {
            let d = local[i].norm();
            if reach.is_none() && (d < m.reach_min || d > m.reach_max) {
                reach = Some((i, d));
            }
            if work.is_none() && (local[i].z < m.z_min || local[i].z > m.z_max) {
                work = Some((i, local[i].z));
            }
            let (lo, hi) = (i.saturating_sub(1), (i + 1).min(n - 1));
            let v = (world[hi] - world[lo]).norm() / (s[hi].t - s[lo].t);
            if speed.is_none() && v > m.v_max {
                speed = Some((i, v));
            }
            if i > 0 && i + 1 < n {
                let v1 = (world[i + 1] - world[i]) / (s[i + 1].t - s[i].t);
                let v0 = (world[i] - world[i - 1]) / (s[i].t - s[i - 1].t);
                let a = (2.0 * (v1 - v0) / (s[i + 1].t - s[i - 1].t)).norm();
                if accel.is_none() && a > m.a_max {
                    accel = Some((i, a));
                }
            }
        }
        for (k, hit) in [reach, work, speed, accel].into_iter().enumerate() {
            found[k].push(hit);
        }
    }
    let reasons = [
        RejectReason::Reach,
        RejectReason::Workspace,
        RejectReason::Speed,
        RejectReason::Acceleration,
    ];
    for (k, reason) in reasons.into_iter().enumerate() {
        if let Some((arm, (i, v))) = found[k].iter().enumerate().find_map(|(a, h)| h.map(|h| (a, h))) {
            return Verdict::Rejected {
                reason,
                arm,
                index: Some(i),
                value: Some(v),
            };
        }
    }
    Verdict::Accepted
}

fn same_verdict(a: &Verdict, b: &Verdict) -> bool {
    match (a, b) {
        (Verdict::Accepted, Verdict::Accepted) => true,
        (
            Verdict::Rejected { reason, arm, index, value },
            Verdict::Rejected { reason: r2, arm: a2, index: i2, value: v2 },
        ) => {
            reason == r2
                && arm == a2
                && index == i2
                && match (value, v2) {
                    (Some(x), Some(y)) => (x - y).abs() <= 1e-9 * x.abs().max(1.0),
                    (None, None) => true,
                    _ => false,
                }
        }
        _ => false,
    }
}

fn pipeline_conservation() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let truth = write_corpus(dir.path(), 2024, &CorpusSpec::default()).map_err(|e| e.to_string())?;
    let scenes: Vec<PathBuf> = truth.scenes.iter().map(|s| dir.path().join(&s.scene_id)).collect();
    let model = corpus_model();
    let mut set: EpisodeSet = ingest_scenes(&scenes, Parallelism::default()).map_err(|e| e.to_string())?;
    filter_episodes(&mut set, &ModelSpec::Shared(model.clone()), Parallelism::default()).map_err(|e| e.to_string())?;

    let mut listed = BTreeSet::new();
    for s in &scenes {
        let m = SessionManifest::read(s.join("manifest.json")).map_err(|e| e.to_string())?;
        for r in m.recordings {
            listed.insert((m.scene_id.clone(), r.path));
        }
    }
    let reported: BTreeSet<_> = set.recordings.iter().map(|r| (r.scene_id.clone(), r.path.clone())).collect();
    check(listed.len() == 60, format!("{} recordings in manifests", listed.len()))?;
    check(reported == listed && set.recordings.len() == 60, "recordings missing from the episode set")?;
    for r in &set.recordings {
        let ok = match r.role {
            Role::Mapping => r.status == RecordingStatus::Mapping,
            Role::Calibration => r.status == RecordingStatus::Calibration,
            Role::Demo => match r.status {
                RecordingStatus::Paired | RecordingStatus::Single => r
                    .episode
                    .as_ref()
                    .and_then(|id| set.episodes.iter().find(|e| &e.id == id))
                    .is_some_and(|e| e.scene_id == r.scene_id && e.sources.contains(&r.path)),
                RecordingStatus::Unpaired | RecordingStatus::Rejected => r.episode.is_none(),
                _ => false,
            },
        };
        check(ok, format!("{}/{} has status {:?}", r.scene_id, r.path, r.status))?;
    }
    let sources: usize = set.episodes.iter().map(|e| e.sources.len()).sum();
    let in_episodes = set.recordings.iter().filter(|r| r.episode.is_some()).count();
    check(sources == in_episodes, "episode sources and recording outcomes disagree")?;

    let mut worst: f64 = 0.0;
    for scene in &truth.scenes {
        for cal in &scene.calibrations {
            let got = set
                .calibration(&scene.scene_id, &cal.serial)
                .ok_or_else(|| format!("no calibration for {}/{}", scene.scene_id, cal.serial))?;
            worst = worst
                .max((got.width_min - cal.width_min).abs())
                .max((got.width_max - cal.width_max).abs());
        }
    }
    check(worst <= 5e-4, format!("calibration error {:.3} mm", worst * 1e3))?;

    let mut rejected = 0;
    for e in &set.episodes {
        let want = brute_force_verdict(&e.trajectories, &model);
        let got = e.verdict.as_ref().ok_or("unfiltered episode")?;
        check(same_verdict(got, &want), format!("{}: {got:?} vs {want:?}", e.id))?;
        rejected += !got.is_accepted() as usize;
    }
    Ok(format!(
        "60 recordings, {} episodes ({rejected} rejected), calibration error {:.3} mm",
        set.episodes.len(),
        worst * 1e3
    ))
}

fn mirror_involution() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for k in 0..100 {
        let (w, h, c) = (rng.random_range(4..96), rng.random_range(2..64), rng.random_range(1..=4));
        let data = (0..w * h * c).map(|_| rng.random::<u8>()).collect();
        let img = ImageBuffer::new(w, h, c, data).map_err(|e| e.to_string())?;
        let rw = rng.random_range(1..=w / 2);
        let rh = rng.random_range(1..=h);
        let left = Rect {
            x: rng.random_range(0..=w / 2 - rw),
            y: rng.random_range(0..=h - rh),
            w: rw,
            h: rh,
        };
        let right = Rect {
            x: rng.random_range(w / 2..=w - rw),
            y: rng.random_range(0..=h - rh),
            w: rw,
            h: rh,
        };
        let twice = mirror_reflect(&mirror_reflect(&img, left, right).map_err(|e| e.to_string())?, left, right)
            .map_err(|e| e.to_string())?;
        check(twice == img, format!("image {k} changed"))?;
    }
    Ok("100 images".into())
}

fn scheduler_timeline() -> Outcome {
    let dt = 0.05;
    let chunk = ActionChunk::uniform(
        10.0,
        dt,
        &(0..6).map(|k| Pose::from_translation(0.01 * k as f64, 0.0, 0.0)).collect::<Vec<_>>(),
        &[0.02, 0.03, 0.04, 0.05, 0.06, 0.07],
    )
    .map_err(|e| e.to_string())?;
    let mut cases = 0;
    for (delay, robot, gripper) in [
        (0.0, 0.0, 0.0),
        (0.120, 0.100, 0.040),
        (0.120, 0.040, 0.100),
        (0.010, 0.100, 0.040),
        (0.030, 0.050, 0.050),
        (0.300, 0.100, 0.000),
        (0.150, 0.100, 0.040),
    ] {
        let profile = LatencyProfile::new(0.0, 0.0, gripper, robot).map_err(|e| e.to_string())?;
        let t_output = 10.0 + delay;
        let t_act = t_output + f64::max(robot, gripper);
        let keep: Vec<usize> = (0..6).filter(|&k| 10.0 + k as f64 * dt >= t_act - 1e-9).collect();
        let trimmed = match trim_outdated(&chunk, t_output, &profile) {
            Ok(t) => t,
            Err(e) => {
                check(keep.is_empty() && e.kind() == "empty_chunk", format!("delay {delay}: {e}"))?;
                cases += 1;
                continue;
            }
        };
        check(trimmed.discarded == 6 - keep.len(), format!("delay {delay}: discarded {}", trimmed.discarded))?;
        let targets = to_absolute_targets(&trimmed.chunk, &Pose::identity());
        let plan = plan_dispatch(&targets, &profile, t_output).map_err(|e| e.to_string())?;
        for (actuator, l) in [(Actuator::Robot, robot), (Actuator::Gripper, gripper)] {
            let entries: Vec<_> = plan.for_actuator(actuator).collect();
            check(entries.len() == keep.len(), "entry count")?;
            for (e, &k) in entries.iter().zip(&keep) {
                let t_target = 10.0 + k as f64 * dt;
                check(
                    (e.t_target - t_target).abs() < 1e-12 && (e.t_send - (t_target - l)).abs() < 1e-12,
                    format!("delay {delay}, step {k}: {e:?}"),
                )?;
            }
        }
        cases += 1;
    }
    // Worked examples: 120 ms + 100 ms discards five steps, 400 ms empties
    // the chunk, and the gripper leaves 60 ms after the robot.
    let p = LatencyProfile::new(0.0, 0.0, 0.040, 0.100).map_err(|e| e.to_string())?;
    check(trim_outdated(&chunk, 10.12, &p).map_err(|e| e.to_string())?.discarded == 5, "five discarded")?;
    let slow = LatencyProfile::new(0.0, 0.0, 0.0, 0.400).map_err(|e| e.to_string())?;
    check(trim_outdated(&chunk, 10.0, &slow).is_err(), "400 ms must empty the chunk")?;
    let plan = plan_dispatch(&to_absolute_targets(&chunk, &Pose::identity()), &p, 0.0).map_err(|e| e.to_string())?;
    for (r, g) in plan.for_actuator(Actuator::Robot).zip(plan.for_actuator(Actuator::Gripper)) {
        check((g.t_send - r.t_send - 0.060).abs() < 1e-12, "gripper offset")?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..1000 {
        let mut l = || rng.random_range(0.0..0.3);
        let p = LatencyProfile::new(l(), 0.0, l(), l()).map_err(|e| e.to_string())?;
        let steps: Vec<ActionStep> = (0..6)
            .map(|k| ActionStep {
                t_target: k as f64 * dt,
                rel_pose: Pose::identity(),
                width: 0.04,
            })
            .collect();
        let c = ActionChunk::new(0.0, steps, dt).map_err(|e| e.to_string())?;
        let t_out = rng.random_range(0.0..0.2);
        let discarded = |p: &LatencyProfile| trim_outdated(&c, t_out, p).map(|t| t.discarded).unwrap_or(6);
        if let Ok(once) = trim_outdated(&c, t_out, &p) {
            let twice = trim_outdated(&once.chunk, t_out, &p).map_err(|e| e.to_string())?;
            check(twice.chunk == once.chunk, format!("profile {i}: trim not idempotent"))?;
        }
        let mut q = p;
        let extra = rng.random_range(0.0..0.1);
        match i % 3 {
            0 => q.l_camera += extra,
            1 => q.l_gripper_exec += extra,
            _ => q.l_robot_exec += extra,
        }
        check(discarded(&q) >= discarded(&p), format!("profile {i}: discard count decreased"))?;
    }
    Ok(format!("{cases} timeline cases, 1000 random profiles"))
}

fn run_cli(args: &[&str]) -> Result<String, String> {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = umi_cli::run_with(std::iter::once("umi").chain(args.iter().copied()), &mut out, &mut err);
    if code != 0 {
        return Err(format!("umi {} exited {code}: {}", args.join(" "), String::from_utf8_lossy(&err)));
    }
    Ok(String::from_utf8_lossy(&out).into_owned())
}

fn full_pipeline(root: &Path) -> Result<(), String> {
    let p = |s: &str| root.join(s).display().to_string();
    run_cli(&["synth", "--seed", "77", "--out", &p("corpus")])?;
    run_cli(&[
        "ingest",
        &p("corpus/scene_00"),
        &p("corpus/scene_01"),
        &p("corpus/scene_02"),
        "--out",
        &p("episodes.json"),
    ])?;
    run_cli(&["filter", "--model", &p("corpus/model.json"), "--episodes", &p("episodes.json"), "--out", &p("filtered.json")])?;
    run_cli(&["export", "--config", &p("corpus/export.json"), "--episodes", &p("filtered.json"), "--out", &p("dataset")])?;
    run_cli(&[
        "eval-traj",
        "--est",
        &p("corpus/scene_01/demo_00_L.jsonl"),
        "--gt",
        &p("corpus/scene_01/demo_00_L.jsonl"),
        "--pair",
        &p("corpus/scene_01/demo_00_R.jsonl"),
        &p("corpus/scene_01/demo_00_R.jsonl"),
        "--out",
        &p("eval.json"),
    ])?;
    let scenario = r#"{"name": "matched",
        "profile": {"l_camera": 0.13, "l_proprio": 0.005, "l_gripper_exec": 0.04, "l_robot_exec": 0.1},
        "assumed_profile": {"l_camera": 0.13, "l_proprio": 0.005, "l_gripper_exec": 0.04, "l_robot_exec": 0.1},
        "freq": 20, "inference_delay": 0.01, "inference_jitter": 0.005, "seed": 77}"#;
    fs::write(root.join("sim.json"), scenario).map_err(|e| e.to_string())?;
    fs::write(root.join("sweep.json"), format!("[{scenario}]")).map_err(|e| e.to_string())?;
    run_cli(&["simulate", "--config", &p("sim.json"), "--out", &p("report.json"), "--trace", &p("trace.csv")])?;
    run_cli(&["sweep", "--configs", &p("sweep.json"), "--out", &p("table.csv")])?;
    Ok(())
}

fn collect(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) -> std::io::Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let path = e.path();
        if path.is_dir() {
            collect(root, &path, out)?;
        } else {
            let text = fs::read(&path)?;
            // Drop the run timestamp, the one field allowed to differ.
            let kept: Vec<u8> = String::from_utf8_lossy(&text)
                .lines()
                .filter(|l| !l.trim_start().starts_with("\"generated_at\""))
                .flat_map(|l| l.bytes().chain(std::iter::once(b'\n')))
                .collect();
            out.push((path.strip_prefix(root).unwrap().display().to_string(), kept));
        }
    }
    Ok(())
}

fn cli_determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    full_pipeline(a.path())?;
    full_pipeline(b.path())?;
    let (mut fa, mut fb) = (Vec::new(), Vec::new());
    collect(a.path(), a.path(), &mut fa).map_err(|e| e.to_string())?;
    collect(b.path(), b.path(), &mut fb).map_err(|e| e.to_string())?;
    check(fa.len() == fb.len(), "different file sets")?;
    for ((na, da), (nb, db)) in fa.iter().zip(&fb) {
        check(na == nb, format!("{na} vs {nb}"))?;
        check(da == db, format!("{na} differs"))?;
    }
    let bytes: usize = fa.iter().map(|f| f.1.len()).sum();
    Ok(format!("{} files, {bytes} bytes identical", fa.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("frame invariance", frame_invariance),
        ("delta round trip", delta_round_trip),
        ("lag recovery", lag_recovery),
        ("latency arithmetic", latency_arithmetic),
        ("simulation efficacy", simulation_efficacy),
        ("ATE/RPE calibration", ate_rpe_calibration),
        ("pipeline conservation", pipeline_conservation),
        ("mirror involution", mirror_involution),
        ("scheduler timeline", scheduler_timeline),
        ("CLI determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
