//! Software layer between hand-held gripper demonstrations and robot
//! execution.
//!
//! The crate is organised by concern:
//!
//! - [`se3`]: rigid-transform algebra and the relative / delta / absolute
//!   action representations.
//! - [`stream`]: timestamped streams, interpolation and the JSONL stream
//!   format.
//! - [`sync`]: latency-aware alignment of camera, pose and width streams into
//!   observation tuples, plus bimanual soft synchronisation.
//! - [`latency`]: the camera, proprioception and execution latency
//!   measurement procedures, including cross-correlation lag estimation.
//! - [`schedule`]: inference-time action latency matching (trimming,
//!   dispatch ahead of time, retiming).
//! - [`eval`]: ATE and inter-gripper RPE with rigid alignment.
//! - [`pipeline`]: demonstration ingestion, calibration, pairing, kinematic
//!   filtering, mirror reflection and dataset export.
//! - [`sim`]: a deterministic closed-loop simulation of the deployment loop.
//! - [`synth`]: seeded synthetic demonstration corpora.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iterators otherwise.

pub mod error;
pub mod eval;
pub mod latency;
pub mod par;
pub mod pipeline;
pub mod schedule;
pub mod se3;
pub mod sim;
pub mod stats;
pub mod stream;
pub mod sync;
pub mod synth;

pub use error::{Error, Result};
pub use latency::LatencyProfile;
pub use se3::{ActionRepr, Pose, PoseTrajectory};
pub use stream::{Sample, TimedStream};

/// Gripper finger stroke in meters.
pub const GRIPPER_STROKE: f64 = 0.08;

/// Tolerance used when comparing timestamps that come out of float
/// arithmetic (e.g. `t_obs - k / freq` landing on a sample time).
pub const TIME_EPS: f64 = 1e-9;
