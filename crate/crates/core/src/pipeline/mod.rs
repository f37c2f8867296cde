//! Demonstration ingestion and dataset export.
//!
//! A scene directory holds a `manifest.json`, one mapping recording, one
//! calibration recording per gripper and any number of demonstrations:
//!
//! ```text
//! <scene>/manifest.json
//! <scene>/mapping.jsonl
//! <scene>/calib_<serial>.jsonl
//! <scene>/demo_*.jsonl
//! ```
//!
//! Recordings use the stream file format of [`crate::stream`]. A SLAM
//! front-end feeding this pipeline must emit, per recording, a header with
//! `stream_id`, `serial` and `frame_id` (the map frame for demos), followed
//! by `pose` records (gripper pose in the map frame) and either `width`
//! records or `markers` records (finger marker pixel centers). Optional
//! `frame` records name the camera frames.

mod calib;
mod export;
mod ingest;
mod kinematics;
mod mirror;
mod pairing;

pub use calib::{
    calibrate_gripper, find_extrema, marker_widths, width_from_markers, GripperCalibration, MarkerMap,
    MarkerWidths, MIN_CYCLES, PROMINENCE_FRACTION,
};
pub use export::{
    export_dataset, ArmSample, Dataset, DatasetCounts, DatasetManifest, DatasetSample, EpisodeExport,
    ExportConfig, ExportStatus,
};
pub use ingest::{
    filter_episodes, ingest_scene, ingest_scenes, inter_gripper_stream, Episode, EpisodeSet, Meta,
    RecordingEntry, RecordingOutcome, RecordingStatus, Role, SessionManifest,
};
pub use kinematics::{
    accelerations, kinematic_filter, speeds, KinematicModel, ModelSpec, RejectReason, Verdict,
};
pub use mirror::{mirror_reflect, ImageBuffer, Rect};
pub use pairing::{pair_recordings, Pairing, RecordingSpan, AMBIGUITY_MARGIN};
