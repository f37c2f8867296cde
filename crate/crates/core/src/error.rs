use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("interpolation factor {0} outside [0, 1]")]
    AlphaOutOfRange(f64),
    #[error("timestamps must be finite and strictly increasing (at index {index})")]
    NonMonotonic { index: usize },
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("time {t} outside stream coverage [{first}, {last}]")]
    OutOfRange { t: f64, first: f64, last: f64 },
    #[error("target rate {target} Hz exceeds native rate {native} Hz")]
    RateTooHigh { target: f64, native: f64 },
    #[error("stream `{stream}` latency {latency} s exceeds camera latency {camera} s")]
    CameraNotSlowest { stream: String, latency: f64, camera: f64 },
    #[error("clock skew: non-positive time difference {diff} s at sample {index}")]
    ClockSkew { index: usize, diff: f64 },
    #[error("insufficient overlap: {available} s available, {required} s required")]
    InsufficientOverlap { available: f64, required: f64 },
    #[error("max lag {max_lag} s is not below half the probe period {half_period} s")]
    AliasingRisk { max_lag: f64, half_period: f64 },
    #[error("low-confidence correlation peak: score {score:.3} < {threshold}")]
    LowConfidence { score: f64, threshold: f64 },
    #[error("measurement inconsistency: {0}")]
    MeasurementInconsistency(String),
    #[error("lag channels disagree: {spread} s spread exceeds {allowed} s")]
    AmbiguousLag { spread: f64, allowed: f64 },
    #[error("all {discarded} steps outdated; re-inference required")]
    EmptyChunk { discarded: usize },
    #[error("late plan: steps {steps:?} would be sent before {now} s")]
    LatePlan { steps: Vec<usize>, now: f64 },
    #[error("degenerate point set: {0}")]
    Degenerate(String),
    #[error("no associated samples between trajectories")]
    NoAssociation,
    #[error("frame mismatch: `{left}` vs `{right}`")]
    FrameMismatch { left: String, right: String },
    #[error("calibration insufficient: found {maxima} maxima and {minima} minima, need {needed}")]
    CalibrationInsufficient { maxima: usize, minima: usize, needed: usize },
    #[error("invalid rect: {0}")]
    InvalidRect(String),
    #[error("absolute actions need a declared global frame")]
    AbsoluteWithoutFrame,
    #[error("ambiguous pairing for `{recording}`: candidates {candidates:?} overlap within {margin} s")]
    AmbiguousPairing { recording: String, candidates: Vec<String>, margin: f64 },
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("missing calibration for gripper `{0}`")]
    MissingCalibration(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Empty(_) => "empty",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::TooFewSamples { .. } => "too_few_samples",
            Error::AlphaOutOfRange(_) => "alpha_out_of_range",
            Error::NonMonotonic { .. } => "non_monotonic",
            Error::InvalidValue(_) => "invalid_value",
            Error::OutOfRange { .. } => "out_of_range",
            Error::RateTooHigh { .. } => "rate_too_high",
            Error::CameraNotSlowest { .. } => "camera_not_slowest",
            Error::ClockSkew { .. } => "clock_skew",
            Error::InsufficientOverlap { .. } => "insufficient_overlap",
            Error::AliasingRisk { .. } => "aliasing_risk",
            Error::LowConfidence { .. } => "low_confidence",
            Error::MeasurementInconsistency(_) => "measurement_inconsistency",
            Error::AmbiguousLag { .. } => "ambiguous_lag",
            Error::EmptyChunk { .. } => "empty_chunk",
            Error::LatePlan { .. } => "late_plan",
            Error::Degenerate(_) => "degenerate",
            Error::NoAssociation => "no_association",
            Error::FrameMismatch { .. } => "frame_mismatch",
            Error::CalibrationInsufficient { .. } => "calibration_insufficient",
            Error::InvalidRect(_) => "invalid_rect",
            Error::AbsoluteWithoutFrame => "absolute_without_frame",
            Error::AmbiguousPairing { .. } => "ambiguous_pairing",
            Error::InvalidManifest(_) => "invalid_manifest",
            Error::MissingCalibration(_) => "missing_calibration",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
