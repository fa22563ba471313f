//! Prominent local minima of the final score and the user-sized keyframe set.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::SelectionError;
use crate::ingest::FrameSequence;

/// A valley of the score signal at pair index `pair_index`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub pair_index: usize,
    pub value: f64,
    pub prominence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyframeSet {
    /// Original frame numbers, strictly increasing.
    pub frame_indices: Vec<u64>,
    /// Positions of the keyframes within the sampled sequence.
    pub positions: Vec<usize>,
    pub pair_indices: Vec<usize>,
    pub scores: Vec<f64>,
    pub prominences: Vec<f64>,
    pub k_requested: usize,
}

impl KeyframeSet {
    pub fn len(&self) -> usize {
        self.frame_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frame_indices.is_empty()
    }

    /// Fewer candidates than requested.
    pub fn is_short(&self) -> bool {
        self.len() < self.k_requested
    }
}

/// `j` is a minimum when `values[j] < values[j - 1]` and the first following
/// value that differs from `values[j]` is larger. A flat valley reports its
/// leftmost point; the series endpoints never qualify.
pub fn is_local_minimum(values: &[f64], j: usize) -> bool {
    if j == 0 || j + 1 >= values.len() || !(values[j] < values[j - 1]) {
        return false;
    }
    values[j + 1..]
        .iter()
        .find(|&&v| v != values[j])
        .is_some_and(|&v| v > values[j])
}

/// Height of the lower of the two enclosing peaks above the valley. Each side
/// scans outward until a strictly lower value or the series end.
pub fn minimum_prominence(values: &[f64], j: usize) -> f64 {
    let v = values[j];
    let side_peak = |iter: &mut dyn Iterator<Item = &f64>| {
        iter.take_while(|&&x| x >= v).fold(v, |m, &x| m.max(x))
    };
    let left = side_peak(&mut values[..j].iter().rev());
    let right = side_peak(&mut values[j + 1..].iter());
    left.min(right) - v
}

pub fn local_minima(values: &[f64]) -> Result<Vec<Minimum>, SelectionError> {
    if values.len() < 3 {
        return Err(SelectionError::SeriesTooShort(values.len()));
    }
    Ok((1..values.len() - 1)
        .filter(|&j| is_local_minimum(values, j))
        .map(|j| Minimum {
            pair_index: j,
            value: values[j],
            prominence: minimum_prominence(values, j),
        })
        .collect())
}

/// Drop minima whose prominence is below `fraction` of the signal's range.
pub fn filter_by_prominence(minima: &[Minimum], values: &[f64], fraction: f64) -> Vec<Minimum> {
    let (lo, hi) = crate::fusion::min_max(values);
    let threshold = fraction * (hi - lo).max(0.0);
    minima
        .iter()
        .copied()
        .filter(|m| m.prominence >= threshold)
        .collect()
}

/// Prominences closer than this rank as ties.
const PROMINENCE_QUANTUM: f64 = 1e-9;

/// Descending prominence, then lower value, then earlier index.
fn rank(a: &Minimum, b: &Minimum) -> Ordering {
    let q = |m: &Minimum| (m.prominence / PROMINENCE_QUANTUM).round();
    q(b).total_cmp(&q(a))
        .then(a.value.total_cmp(&b.value))
        .then(a.pair_index.cmp(&b.pair_index))
}

/// Greedy pick by rank, skipping candidates closer than `min_separation`
/// seconds to an accepted keyframe. Pair `j` maps to the later frame `j + 1`.
pub fn select_keyframes(
    minima: &[Minimum],
    k: usize,
    min_separation: f64,
    frames: &FrameSequence,
) -> Result<KeyframeSet, SelectionError> {
    if k == 0 {
        return Err(SelectionError::ZeroK);
    }
    let mut ranked: Vec<Minimum> = minima
        .iter()
        .copied()
        .filter(|m| m.pair_index + 1 < frames.indices.len())
        .collect();
    ranked.sort_by(rank);

    let mut accepted: Vec<(usize, Minimum)> = Vec::with_capacity(k);
    for m in ranked {
        if accepted.len() == k {
            break;
        }
        let position = m.pair_index + 1;
        let t = frames.seconds(frames.indices[position]);
        let too_close = accepted
            .iter()
            .any(|&(p, _)| (frames.seconds(frames.indices[p]) - t).abs() < min_separation);
        if !too_close {
            accepted.push((position, m));
        }
    }
    accepted.sort_by_key(|&(p, _)| p);

    Ok(KeyframeSet {
        frame_indices: accepted.iter().map(|&(p, _)| frames.indices[p]).collect(),
        positions: accepted.iter().map(|&(p, _)| p).collect(),
        pair_indices: accepted.iter().map(|(_, m)| m.pair_index).collect(),
        scores: accepted.iter().map(|(_, m)| m.value).collect(),
        prominences: accepted.iter().map(|(_, m)| m.prominence).collect(),
        k_requested: k,
    })
}
