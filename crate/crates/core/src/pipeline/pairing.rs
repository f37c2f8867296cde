use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Two candidate pairings whose overlaps differ by less than this many
/// seconds cannot be told apart automatically.
pub const AMBIGUITY_MARGIN: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingSpan {
    pub path: String,
    pub serial: String,
    pub start: f64,
    pub end: f64,
}

impl RecordingSpan {
    fn overlap(&self, other: &RecordingSpan) -> f64 {
        (self.end.min(other.end) - self.start.max(other.start)).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Pairing {
    /// `(left path, right path)`, ordered by left start time.
    pub pairs: Vec<(String, String)>,
    pub unpaired: Vec<String>,
}

/// Pairs recordings of the left and right grippers by maximal temporal
/// overlap. Recordings of other serials are ignored.
pub fn pair_recordings(left_serial: &str, right_serial: &str, spans: &[RecordingSpan]) -> Result<Pairing> {
    let left: Vec<&RecordingSpan> = spans.iter().filter(|s| s.serial == left_serial).collect();
    let right: Vec<&RecordingSpan> = spans.iter().filter(|s| s.serial == right_serial).collect();

    let mut cands: Vec<(f64, usize, usize)> = Vec::new();
    for (i, l) in left.iter().enumerate() {
        for (j, r) in right.iter().enumerate() {
            let o = l.overlap(r);
            if o > 0.0 {
                cands.push((o, i, j));
            }
        }
    }
    cands.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| left[a.1].path.cmp(&left[b.1].path))
            .then_with(|| right[a.2].path.cmp(&right[b.2].path))
    });

    let mut left_used = vec![false; left.len()];
    let mut right_used = vec![false; right.len()];
    let mut pairs = Vec::new();
    for &(o, i, j) in &cands {
        if left_used[i] || right_used[j] {
            continue;
        }
        let rivals_r: Vec<String> = cands
            .iter()
            .filter(|&&(o2, i2, j2)| i2 == i && j2 != j && !right_used[j2] && o - o2 < AMBIGUITY_MARGIN)
            .map(|&(_, _, j2)| right[j2].path.clone())
            .collect();
        let rivals_l: Vec<String> = cands
            .iter()
            .filter(|&&(o2, i2, j2)| j2 == j && i2 != i && !left_used[i2] && o - o2 < AMBIGUITY_MARGIN)
            .map(|&(_, i2, _)| left[i2].path.clone())
            .collect();
        if !rivals_r.is_empty() {
            let mut candidates = vec![right[j].path.clone()];
            candidates.extend(rivals_r);
            return Err(Error::AmbiguousPairing {
                recording: left[i].path.clone(),
                candidates,
                margin: AMBIGUITY_MARGIN,
            });
        }
        if !rivals_l.is_empty() {
            let mut candidates = vec![left[i].path.clone()];
            candidates.extend(rivals_l);
            return Err(Error::AmbiguousPairing {
                recording: right[j].path.clone(),
                candidates,
                margin: AMBIGUITY_MARGIN,
            });
        }
        left_used[i] = true;
        right_used[j] = true;
        pairs.push((i, j));
    }
    pairs.sort_by(|a, b| left[a.0].start.total_cmp(&left[b.0].start));

    let mut unpaired: Vec<&RecordingSpan> = left
        .iter()
        .zip(&left_used)
        .chain(right.iter().zip(&right_used))
        .filter(|(_, &u)| !u)
        .map(|(s, _)| *s)
        .collect();
    unpaired.sort_by(|a, b| a.start.total_cmp(&b.start).then_with(|| a.path.cmp(&b.path)));
    Ok(Pairing {
        pairs: pairs
            .into_iter()
            .map(|(i, j)| (left[i].path.clone(), right[j].path.clone()))
            .collect(),
        unpaired: unpaired.into_iter().map(|s| s.path.clone()).collect(),
    })
}
