use clap::ValueEnum;

/// File formats that `--schema` documents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemaType {
    Stream,
    Manifest,
    Episodes,
    Model,
    ExportConfig,
    Dataset,
    SimConfig,
    SweepConfigs,
    SweepCsv,
    LatencyReport,
    EvalReport,
    DispatchLog,
    Error,
}

const POSE: &str = "poses are [x, y, z, qw, qx, qy, qz]; meters, unit quaternion (stored with qw >= 0)";

impl SchemaType {
    pub fn document(self) -> String {
        match self {
            SchemaType::Stream => format!(
                r#"stream file (JSONL)
line 1, header:
  {{"stream_id": str, "latency": f64 s (default 0), "rate_hz": f64?, "frame_id": str?, "serial": str?,
   "probe": {{"waveform": {{"kind": "sine", "freq_hz": f64}} | {{"kind": "chirp", "f_start": f64, "f_end": f64}},
             "duration": f64, "amplitude": f64, "offset": f64}}?}}
following lines, one record each, timestamps are receive times in seconds:
  {{"t": f64, "pose": [7 x f64]}}
  {{"t": f64, "width": f64 m}}
  {{"t": f64, "frame": str}}
  {{"t": f64, "markers": [[u, v] | null, [u, v] | null]}}
{POSE}
scalar signals for calibrate-latency use "width" records"#
            ),
            SchemaType::Manifest => r#"scene manifest (<scene>/manifest.json)
{"scene_id": str,
 "gripper_serials": [left, right] | [single],
 "map_frame_id": str,
 "recordings": [{"path": str relative to the scene, "serial": str, "role": "mapping" | "calibration" | "demo"}],
 "marker_maps": {serial: {"slope": m per px, "offset": m}}   (optional)}
exactly one mapping recording; at most one calibration recording per serial"#
                .into(),
            SchemaType::Episodes => r#"episode set (ingest and filter output)
{"calibrations": {scene_id: {serial: {"serial", "width_min", "width_max"}}},
 "recordings": [{"scene_id", "path", "serial", "role",
                 "status": "mapping" | "calibration" | "paired" | "single" | "unpaired" | "rejected",
                 "episode": str?, "detail": str?}],
 "episodes": [{"id", "scene_id", "serials", "sources", "trajectories", "widths", "frames"?, "verdict"?}],
 "meta": {"tool": str, "generated_at": unix seconds?}}
verdict: {"status": "accepted"} | {"status": "rejected", "reason": "insufficient_data" | "reach" | "workspace" | "speed" | "acceleration", "arm": int, "index": int?, "value": f64?}
meta.generated_at is the only field that differs between identical runs"#
                .into(),
            SchemaType::Model => format!(
                r#"kinematic model (filter --model)
one model shared by every arm, or a list with one model per arm:
{{"base_pose": [7 x f64], "reach_min": m, "reach_max": m, "z_min": m, "z_max": m, "v_max": m/s, "a_max": m/s^2}}
z limits are in the base frame; {POSE}"#
            ),
            SchemaType::ExportConfig => r#"export config (export --config)
{"freq": Hz, "obs_horizon": int, "action_horizon": int,
 "repr": "relative_trajectory" | "delta" | "absolute",
 "global_frame": str?}   absolute actions require global_frame"#
                .into(),
            SchemaType::Dataset => r#"dataset directory (export --out)
manifest.json: {"config", "episodes": [{"id", "status": "exported" | "rejected" | "unfiltered", "verdict"?, "samples", "skipped"}],
                "counts": {"episodes", "exported", "rejected", "unfiltered", "samples"}, "meta"}
samples.jsonl, one object per line:
  {"episode", "index", "t_obs", "frame_ref",
   "arms": [{"ee_history", "width_history", "anchor", "actions", "action_widths"}],
   "inter_gripper": [poses]?}
ee_history is relative to the latest observed pose; actions are encoded in the configured representation"#
                .into(),
            SchemaType::SimConfig => r#"simulation scenario (simulate --config, one element of sweep --configs)
{"name": str?,
 "profile": {"l_camera", "l_proprio", "l_gripper_exec", "l_robot_exec"} seconds, true latencies,
 "assumed_profile": same shape, latencies the scheduler compensates for,
 "freq": policy Hz, "inference_delay": s, "inference_jitter": s (default 0),
 "tracker_tau": s (default 0.03), "seed": int (default 0), "chunk_steps": int (default 6), "camera_rate": Hz (default 60),
 "toss": {"start": [x, y, z], "elevation_deg", "travel", "peak_speed", "t_start", "duration",
          "width_closed", "width_open", "sample_rate"} (all optional)}
the default latencies used in examples are placeholders, not measurements of a real rig"#
                .into(),
            SchemaType::SweepConfigs => "sweep configs: a JSON array of simulation scenarios (see --schema sim-config)".into(),
            SchemaType::SweepCsv => r#"sweep table (CSV, one header line)
name,freq,l_camera,l_proprio,l_gripper_exec,l_robot_exec,assumed_l_camera,assumed_l_proprio,assumed_l_gripper_exec,assumed_l_robot_exec,inference_delay,tracker_tau,seed,temporal_misalignment,lag,tracking_rmse,release_time_error,release_setpoint_skew,jerk_metric,empty_chunks
times in seconds, distances in meters"#
                .into(),
            SchemaType::LatencyReport => r#"latency report (calibrate-latency)
{"l_e2e": s, "score": peak correlation, "method": "probe_correlation" | "signal_correlation" | "pose_translation_correlation",
 "l_exec": s?   (l_e2e - --l-obs),
 "estimate": {"lag", "score", "grid_lag", "samples_used"}?,
 "channels": {"lag", "score", "channels": [[axis, estimate]]}?}
the measured signal is modeled as measured(t) = commanded(t - l_e2e)"#
                .into(),
            SchemaType::EvalReport => r#"trajectory evaluation report (eval-traj)
{"ate": {"pos_mean": m, "pos_rmse": m, "rot_mean": deg, "rot_rmse": deg,
         "alignment": {"transform": pose, "scale", "residual_rmse", "matched"},
         "times", "pos_errors", "rot_errors"},
 "pair_ate": same as ate?,
 "rpe": {"pos_mean", "pos_rmse", "rot_mean", "rot_rmse", "matched"}?}
estimates are associated to ground truth by nearest timestamp within the gate"#
                .into(),
            SchemaType::DispatchLog => format!(
                r#"dispatch log (JSONL)
{{"t_send": s, "t_target": s, "actuator": "robot" | "gripper", "pose": [7 x f64]}} or {{..., "width": m}}
{POSE}"#
            ),
            SchemaType::Error => r#"error report (stderr, exit code 1)
{"error": kind, "message": str}
usage errors exit with code 2 and print usage text instead"#
                .into(),
        }
    }
}
