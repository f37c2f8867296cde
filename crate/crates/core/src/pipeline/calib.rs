use log::debug;
use serde::{Deserialize, Serialize};

use crate::stream::{MarkerPair, Sample, TimedStream};
use crate::{stats, Error, Result, GRIPPER_STROKE};

/// Open/close cycles required for a calibration recording.
pub const MIN_CYCLES: usize = 5;

/// Extrema must stand out by this fraction of the recording's full range.
pub const PROMINENCE_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GripperCalibration {
    pub serial: String,
    pub width_min: f64,
    pub width_max: f64,
}

impl GripperCalibration {
    pub fn new(serial: impl Into<String>, width_min: f64, width_max: f64) -> Result<Self> {
        let c = Self {
            serial: serial.into(),
            width_min,
            width_max,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.width_min && self.width_min < self.width_max && self.width_max <= GRIPPER_STROKE) {
            return Err(Error::InvalidValue(format!(
                "calibration for `{}` needs 0 <= min < max <= {GRIPPER_STROKE}, got [{}, {}]",
                self.serial, self.width_min, self.width_max
            )));
        }
        Ok(())
    }

    /// Clamps a raw width into the calibrated range.
    pub fn apply(&self, raw: f64) -> f64 {
        raw.clamp(self.width_min, self.width_max)
    }
}

/// Alternating extrema whose swing from the previous extremum is at least
/// `prominence`. The first and last samples may qualify.
pub fn find_extrema(values: &[f64], prominence: f64) -> (Vec<usize>, Vec<usize>) {
    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    if values.is_empty() {
        return (maxima, minima);
    }
    let (mut hi, mut lo) = (0usize, 0usize);
    let mut dir = 0i8;
    let mut cand = 0usize;
    for (i, &v) in values.iter().enumerate().skip(1) {
        match dir {
            0 => {
                if v > values[hi] {
                    hi = i;
                }
                if v < values[lo] {
                    lo = i;
                }
                if values[hi] - values[lo] >= prominence {
                    if lo < hi {
                        minima.push(lo);
                        dir = 1;
                        cand = hi;
                    } else {
                        maxima.push(hi);
                        dir = -1;
                        cand = lo;
                    }
                }
            }
            1 => {
                if v > values[cand] {
                    cand = i;
                } else if values[cand] - v >= prominence {
                    maxima.push(cand);
                    dir = -1;
                    cand = i;
                }
            }
            _ => {
                if v < values[cand] {
                    cand = i;
                } else if v - values[cand] >= prominence {
                    minima.push(cand);
                    dir = 1;
                    cand = i;
                }
            }
        }
    }
    match dir {
        1 => maxima.push(cand),
        -1 => minima.push(cand),
        _ => {}
    }
    (maxima, minima)
}

/// Width range from a recording in which the gripper is fully opened and
/// closed at least [`MIN_CYCLES`] times.
pub fn calibrate_gripper(serial: &str, raw: &TimedStream<f64>) -> Result<GripperCalibration> {
    let values: Vec<f64> = raw.samples().iter().map(|s| s.value).collect();
    let (Some(&vmax), Some(&vmin)) = (
        values.iter().max_by(|a, b| a.total_cmp(b)),
        values.iter().min_by(|a, b| a.total_cmp(b)),
    ) else {
        return Err(Error::CalibrationInsufficient {
            maxima: 0,
            minima: 0,
            needed: MIN_CYCLES,
        });
    };
    let (maxima, minima) = find_extrema(&values, PROMINENCE_FRACTION * (vmax - vmin).max(f64::MIN_POSITIVE));
    if maxima.len() < MIN_CYCLES || minima.len() < MIN_CYCLES {
        return Err(Error::CalibrationInsufficient {
            maxima: maxima.len(),
            minima: minima.len(),
            needed: MIN_CYCLES,
        });
    }
    let tops: Vec<f64> = maxima.iter().map(|&i| values[i]).collect();
    let bottoms: Vec<f64> = minima.iter().map(|&i| values[i]).collect();
    let width_max = stats::median(&tops).expect("at least MIN_CYCLES maxima");
    let width_min = stats::median(&bottoms).expect("at least MIN_CYCLES minima");
    debug!(
        "calibrated `{serial}`: [{width_min}, {width_max}] from {} maxima / {} minima",
        tops.len(),
        bottoms.len()
    );
    GripperCalibration::new(serial, width_min.max(0.0), width_max.min(GRIPPER_STROKE))
}

/// Affine map from marker pixel distance to finger width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkerMap {
    /// Meters per pixel.
    pub slope: f64,
    /// Meters.
    pub offset: f64,
}

impl MarkerMap {
    /// Unclamped width and whether clamping to the stroke was needed.
    fn map(&self, left: [f64; 2], right: [f64; 2]) -> (f64, bool) {
        let d = (right[0] - left[0]).hypot(right[1] - left[1]);
        let w = self.slope * d + self.offset;
        let c = w.clamp(0.0, GRIPPER_STROKE);
        (c, c != w)
    }
}

/// Finger width from the two marker centers, clamped to the stroke.
pub fn width_from_markers(left: [f64; 2], right: [f64; 2], map: &MarkerMap) -> f64 {
    let (w, clamped) = map.map(left, right);
    if clamped {
        debug!("marker width clamped to {w}");
    }
    w
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkerWidths {
    pub widths: TimedStream<f64>,
    /// Samples dropped because a marker was not detected.
    pub missing: usize,
    pub clamped: usize,
}

/// Width stream from a marker track. Samples with a missing marker are
/// dropped so that interpolation bridges the gap.
pub fn marker_widths(markers: &TimedStream<MarkerPair>, map: &MarkerMap) -> Result<MarkerWidths> {
    let mut missing = 0;
    let mut clamped = 0;
    let mut samples = Vec::with_capacity(markers.len());
    for s in markers.samples() {
        match s.value {
            [Some(l), Some(r)] => {
                let (w, c) = map.map(l, r);
                clamped += c as usize;
                samples.push(Sample { t: s.t, value: w });
            }
            _ => missing += 1,
        }
    }
    if clamped > 0 {
        debug!("{}: {clamped} marker widths clamped", markers.stream_id());
    }
    Ok(MarkerWidths {
        widths: TimedStream::new(markers.stream_id(), markers.latency(), samples)?,
        missing,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Uniform};

    /// Triangle wave with uniform noise in `[-noise, noise]`.
    fn triangle(cycles: usize, lo: f64, hi: f64, per_half: usize, noise: f64, seed: u64) -> TimedStream<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Uniform::new_inclusive(-noise, noise).unwrap();
        let total = 2 * cycles * per_half + 1;
        let samples = (0..total)
            .map(|i| {
                let phase = (i % (2 * per_half)) as f64 / per_half as f64;
                let u = if phase <= 1.0 { phase } else { 2.0 - phase };
                let e = n.sample(&mut rng);
                Sample {
                    t: i as f64 * 0.01,
                    value: lo + (hi - lo) * u + e,
                }
            })
            .collect();
        TimedStream::new("calib", 0.0, samples).unwrap()
    }

    #[test]
    fn ideal_triangle() {
        let c = calibrate_gripper("A", &triangle(5, 0.002, 0.078, 50, 0.0, 0)).unwrap();
        assert!((c.width_min - 0.002).abs() < 1e-12);
        assert!((c.width_max - 0.078).abs() < 1e-12);
    }

    #[test]
    fn noisy_triangle_within_half_millimeter() {
        for seed in 0..50 {
            let c = calibrate_gripper("A", &triangle(5, 0.002, 0.078, 50, 0.0005, seed)).unwrap();
            assert!((c.width_min - 0.002).abs() <= 0.0005, "seed {seed}: {c:?}");
            assert!((c.width_max - 0.078).abs() <= 0.0005, "seed {seed}: {c:?}");
        }
    }

    #[test]
    fn four_cycles_is_insufficient() {
        let err = calibrate_gripper("A", &triangle(4, 0.002, 0.078, 50, 0.0, 0)).unwrap_err();
        assert_eq!(err.kind(), "calibration_insufficient");
    }

    #[test]
    fn extrema_alternate() {
        let v = [0.0, 1.0, 0.0, 1.0, 0.0];
        assert_eq!(find_extrema(&v, 0.5), (vec![1, 3], vec![0, 2, 4]));
        assert_eq!(find_extrema(&[0.0, 0.2, 0.1], 0.5), (vec![], vec![]));
    }

    #[test]
    fn marker_width_arithmetic() {
        let m = MarkerMap {
            slope: 0.0001,
            offset: 0.0,
        };
        assert_eq!(width_from_markers([10.0, 5.0], [10.0, 5.0], &m), 0.0);
        assert!((width_from_markers([0.0, 0.0], [800.0, 0.0], &m) - 0.08).abs() < 1e-15);
        assert_eq!(width_from_markers([0.0, 0.0], [2000.0, 0.0], &m), GRIPPER_STROKE);
    }

    #[test]
    fn marker_track_reconstructs_sine_opening() {
        let m = MarkerMap {
            slope: 0.0001,
            offset: -0.002,
        };
        let truth = |t: f64| 0.04 + 0.035 * (2.0 * t).sin();
        let samples: Vec<_> = (0..200)
            .map(|i| {
                let t = i as f64 / 60.0;
                let d = (truth(t) - m.offset) / m.slope;
                let markers: MarkerPair = if i % 17 == 5 {
                    [None, Some([0.0, 0.0])]
                } else {
                    [Some([640.0 - d / 2.0, 300.0]), Some([640.0 + d / 2.0, 300.0])]
                };
                Sample { t, value: markers }
            })
            .collect();
        let s = TimedStream::new("m", 0.0, samples).unwrap();
        let out = marker_widths(&s, &m).unwrap();
        assert_eq!(out.missing, 12);
        assert_eq!(out.clamped, 0);
        for smp in out.widths.samples() {
            assert!((smp.value - truth(smp.t)).abs() < 1e-6);
        }
    }
}
