//! Timestamped sample streams and their JSONL serialization.
//!
//! Stream timestamps are *receive* times. A stream's declared latency maps
//! them to capture times: `capture = receive - latency`.
//!
//! On disk a stream is one JSON object per line. The first line is a
//! [`StreamHeader`]; every following line is a [`Record`]:
//!
//! ```text
//! {"stream_id":"cam0","latency":0.13,"rate_hz":60.0}
//! {"t":0.0,"frame":"cam0/000000"}
//! {"t":0.0,"pose":[x,y,z,qw,qx,qy,qz]}
//! {"t":0.0,"width":0.04}
//! {"t":0.0,"markers":[[u,v],[u,v]]}
//! ```
//!
//! A single file may interleave record kinds; each kind must be strictly
//! increasing in time on its own.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::latency::ProbeMeta;
use crate::se3::{check_times, Pose, PoseTrajectory, TimedPose};
use crate::{Error, Result, TIME_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample<T> {
    pub t: f64,
    pub value: T,
}

/// Values that can be interpolated between two samples.
pub trait Interpolate: Clone {
    fn interpolate(a: &Self, b: &Self, alpha: f64) -> Self;
}

impl Interpolate for f64 {
    fn interpolate(a: &f64, b: &f64, alpha: f64) -> f64 {
        a + (b - a) * alpha
    }
}

impl Interpolate for Pose {
    fn interpolate(a: &Pose, b: &Pose, alpha: f64) -> Pose {
        a.interpolate_unchecked(b, alpha)
    }
}

/// Strictly time-ordered samples with a declared latency.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedStream<T> {
    stream_id: String,
    latency: f64,
    rate_hz: Option<f64>,
    samples: Vec<Sample<T>>,
}

impl<T> TimedStream<T> {
    pub fn new(stream_id: impl Into<String>, latency: f64, samples: Vec<Sample<T>>) -> Result<Self> {
        if !latency.is_finite() || latency < 0.0 {
            return Err(Error::InvalidValue(format!("latency {latency} must be finite and >= 0")));
        }
        check_times(samples.iter().map(|s| s.t))?;
        Ok(Self {
            stream_id: stream_id.into(),
            latency,
            rate_hz: None,
            samples,
        })
    }

    pub fn from_parts(
        stream_id: impl Into<String>,
        latency: f64,
        times: &[f64],
        values: Vec<T>,
    ) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidValue(format!(
                "{} timestamps for {} values",
                times.len(),
                values.len()
            )));
        }
        let samples = times
            .iter()
            .zip(values)
            .map(|(&t, value)| Sample { t, value })
            .collect();
        Self::new(stream_id, latency, samples)
    }

    /// Declares the native sample rate (otherwise estimated from spacing).
    pub fn with_rate(mut self, rate_hz: f64) -> Result<Self> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::InvalidValue(format!("rate {rate_hz} Hz")));
        }
        self.rate_hz = Some(rate_hz);
        Ok(self)
    }

    pub fn stream_id(&self) -> &str {
        &self.stream_id
    }

    pub fn latency(&self) -> f64 {
        self.latency
    }

    pub fn declared_rate(&self) -> Option<f64> {
        self.rate_hz
    }

    pub fn samples(&self) -> &[Sample<T>] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Sample<T>> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    /// Receive-time coverage `[first, last]`.
    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.samples.first()?.t, self.samples.last()?.t))
    }

    /// Capture-time coverage.
    pub fn capture_span(&self) -> Option<(f64, f64)> {
        self.span().map(|(a, b)| (a - self.latency, b - self.latency))
    }

    /// Declared rate, or the inverse of the median sample spacing.
    pub fn native_rate(&self) -> Option<f64> {
        if self.rate_hz.is_some() {
            return self.rate_hz;
        }
        let gaps: Vec<f64> = self.samples.windows(2).map(|w| w[1].t - w[0].t).collect();
        crate::stats::median(&gaps).map(|g| 1.0 / g)
    }

    /// Same samples with a different declared latency.
    pub fn with_latency(mut self, latency: f64) -> Result<Self> {
        if !latency.is_finite() || latency < 0.0 {
            return Err(Error::InvalidValue(format!("latency {latency} must be finite and >= 0")));
        }
        self.latency = latency;
        Ok(self)
    }

    /// Adds `dt` to every receive timestamp.
    pub fn shifted(mut self, dt: f64) -> Self {
        for s in &mut self.samples {
            s.t += dt;
        }
        self
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> TimedStream<U> {
        TimedStream {
            stream_id: self.stream_id.clone(),
            latency: self.latency,
            rate_hz: self.rate_hz,
            samples: self
                .samples
                .iter()
                .map(|s| Sample {
                    t: s.t,
                    value: f(&s.value),
                })
                .collect(),
        }
    }

    /// Keeps the samples at `indices` (must be increasing).
    pub fn select(&self, indices: &[usize]) -> TimedStream<T>
    where
        T: Clone,
    {
        TimedStream {
            stream_id: self.stream_id.clone(),
            latency: self.latency,
            rate_hz: None,
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    /// Index of the sample nearest to receive time `t` (earlier one on ties).
    pub fn nearest_index(&self, t: f64) -> Option<usize> {
        if self.samples.is_empty() {
            return None;
        }
        let i = self.samples.partition_point(|s| s.t < t);
        if i == 0 {
            return Some(0);
        }
        if i == self.samples.len() {
            return Some(i - 1);
        }
        let before = t - self.samples[i - 1].t;
        let after = self.samples[i].t - t;
        Some(if after < before { i } else { i - 1 })
    }
}

impl<T: Interpolate> TimedStream<T> {
    /// Value at receive time `t`: exact at sample timestamps, interpolated
    /// between neighbors. Requests outside the stream's span are errors.
    pub fn sample_at(&self, t: f64) -> Result<T> {
        let (first, last) = self.span().ok_or(Error::Empty("stream"))?;
        if !t.is_finite() || t < first - TIME_EPS || t > last + TIME_EPS {
            return Err(Error::OutOfRange { t, first, last });
        }
        let i = self.samples.partition_point(|s| s.t < t);
        // Snap to a node when float arithmetic lands within TIME_EPS of it.
        if i < self.samples.len() && (self.samples[i].t - t).abs() <= TIME_EPS {
            return Ok(self.samples[i].value.clone());
        }
        if i > 0 && (t - self.samples[i - 1].t).abs() <= TIME_EPS {
            return Ok(self.samples[i - 1].value.clone());
        }
        let (a, b) = (&self.samples[i - 1], &self.samples[i]);
        let alpha = (t - a.t) / (b.t - a.t);
        Ok(T::interpolate(&a.value, &b.value, alpha))
    }

    /// Value at capture time `t`, i.e. at receive time `t + latency`.
    pub fn sample_at_capture(&self, t: f64) -> Result<T> {
        self.sample_at(t + self.latency)
    }
}

impl TimedStream<Pose> {
    /// Capture-time pose trajectory.
    pub fn to_trajectory(&self, frame_id: impl Into<String>) -> Result<PoseTrajectory> {
        PoseTrajectory::new(
            frame_id,
            self.samples
                .iter()
                .map(|s| TimedPose {
                    t: s.t - self.latency,
                    pose: s.value,
                })
                .collect(),
        )
    }

    pub fn from_trajectory(stream_id: impl Into<String>, traj: &PoseTrajectory) -> Self {
        TimedStream {
            stream_id: stream_id.into(),
            latency: 0.0,
            rate_hz: None,
            samples: traj
                .samples()
                .iter()
                .map(|s| Sample { t: s.t, value: s.pose })
                .collect(),
        }
    }
}

impl<T: Serialize> Serialize for TimedStream<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a, T> {
            stream_id: &'a str,
            latency: f64,
            #[serde(skip_serializing_if = "Option::is_none")]
            rate_hz: Option<f64>,
            samples: &'a [Sample<T>],
        }
        Repr {
            stream_id: &self.stream_id,
            latency: self.latency,
            rate_hz: self.rate_hz,
            samples: &self.samples,
        }
        .serialize(s)
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for TimedStream<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr<T> {
            stream_id: String,
            latency: f64,
            #[serde(default)]
            rate_hz: Option<f64>,
            samples: Vec<Sample<T>>,
        }
        let r = Repr::<T>::deserialize(d)?;
        let mut s = TimedStream::new(r.stream_id, r.latency, r.samples)
            .map_err(serde::de::Error::custom)?;
        s.rate_hz = r.rate_hz;
        Ok(s)
    }
}

/// First line of every stream file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StreamHeader {
    pub stream_id: String,
    #[serde(default)]
    pub latency: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub serial: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeMeta>,
}

/// Pixel centers of the two finger markers; `None` when not detected.
pub type MarkerPair = [Option<[f64; 2]>; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Record {
    Pose { t: f64, pose: Pose },
    Width { t: f64, width: f64 },
    Frame { t: f64, frame: String },
    Markers { t: f64, markers: MarkerPair },
}

impl Record {
    pub fn t(&self) -> f64 {
        match self {
            Record::Pose { t, .. }
            | Record::Width { t, .. }
            | Record::Frame { t, .. }
            | Record::Markers { t, .. } => *t,
        }
    }
}

/// Contents of one stream file, split by record kind.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StreamFile {
    pub header: StreamHeader,
    pub poses: Vec<Sample<Pose>>,
    pub widths: Vec<Sample<f64>>,
    pub frames: Vec<Sample<String>>,
    pub markers: Vec<Sample<MarkerPair>>,
}

impl StreamFile {
    pub fn new(header: StreamHeader) -> Self {
        Self {
            header,
            ..Default::default()
        }
    }

    pub fn push(&mut self, record: Record) {
        match record {
            Record::Pose { t, pose } => self.poses.push(Sample { t, value: pose }),
            Record::Width { t, width } => self.widths.push(Sample { t, value: width }),
            Record::Frame { t, frame } => self.frames.push(Sample { t, value: frame }),
            Record::Markers { t, markers } => self.markers.push(Sample { t, value: markers }),
        }
    }

    fn stream<T: Clone>(&self, samples: &[Sample<T>], suffix: &str) -> Result<TimedStream<T>> {
        let mut s = TimedStream::new(
            format!("{}{}", self.header.stream_id, suffix),
            self.header.latency,
            samples.to_vec(),
        )?;
        s.rate_hz = self.header.rate_hz;
        Ok(s)
    }

    pub fn pose_stream(&self) -> Result<TimedStream<Pose>> {
        self.stream(&self.poses, "")
    }

    pub fn width_stream(&self) -> Result<TimedStream<f64>> {
        self.stream(&self.widths, "")
    }

    pub fn frame_stream(&self) -> Result<TimedStream<String>> {
        self.stream(&self.frames, "")
    }

    pub fn marker_stream(&self) -> Result<TimedStream<MarkerPair>> {
        self.stream(&self.markers, "")
    }

    /// All records merged in time order (ties keep pose, width, frame,
    /// marker order).
    pub fn records(&self) -> Vec<Record> {
        let mut out: Vec<(f64, u8, usize, Record)> = Vec::new();
        for (i, s) in self.poses.iter().enumerate() {
            out.push((s.t, 0, i, Record::Pose { t: s.t, pose: s.value }));
        }
        for (i, s) in self.widths.iter().enumerate() {
            out.push((s.t, 1, i, Record::Width { t: s.t, width: s.value }));
        }
        for (i, s) in self.frames.iter().enumerate() {
            out.push((s.t, 2, i, Record::Frame { t: s.t, frame: s.value.clone() }));
        }
        for (i, s) in self.markers.iter().enumerate() {
            out.push((s.t, 3, i, Record::Markers { t: s.t, markers: s.value }));
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        out.into_iter().map(|(_, _, _, r)| r).collect()
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path)?;
        Self::from_reader(BufReader::new(file), &path.display().to_string())
    }

    pub fn from_reader(reader: impl BufRead, name: &str) -> Result<Self> {
        let mut lines = reader.lines().enumerate().filter(|(_, l)| {
            l.as_ref().map(|l| !l.trim().is_empty()).unwrap_or(true)
        });
        let parse_err = |line: usize, e: &dyn std::fmt::Display| Error::Parse {
            location: format!("{name}:{}", line + 1),
            message: e.to_string(),
        };
        let (n, first) = lines.next().ok_or(Error::Empty("stream file"))?;
        let header: StreamHeader =
            serde_json::from_str(&first?).map_err(|e| parse_err(n, &e))?;
        let mut file = StreamFile::new(header);
        for (n, line) in lines {
            let record: Record = serde_json::from_str(&line?).map_err(|e| parse_err(n, &e))?;
            file.push(record);
        }
        file.validate().map_err(|e| parse_err(0, &e))?;
        Ok(file)
    }

    fn validate(&self) -> Result<()> {
        check_times(self.poses.iter().map(|s| s.t))?;
        check_times(self.widths.iter().map(|s| s.t))?;
        check_times(self.frames.iter().map(|s| s.t))?;
        check_times(self.markers.iter().map(|s| s.t))?;
        Ok(())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.to_writer(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn to_writer(&self, mut w: impl Write) -> Result<()> {
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for r in self.records() {
            serde_json::to_writer(&mut w, &r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}
