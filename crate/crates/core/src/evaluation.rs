//! Precision, recall and f-measure of a summary against per-annotator ground truth.
//!
//! An automatic keyframe matches a ground-truth frame when their 16-bin hue
//! histograms are closer than `delta` under the color dissimilarity. Each frame
//! is used at most once.

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::color::{self, HueHistogram};
use crate::error::{EvalError, Result};
use crate::ingest::{FrameSequence, GroundTruthSet};
use crate::selection::{self, KeyframeSet, Minimum};

/// Bin count of the histograms used for matching.
pub const MATCH_BINS: usize = 16;
pub const DEFAULT_MATCH_DELTA: f64 = 0.5;

pub fn precision(n_match: usize, n_candidate: usize) -> Result<f64, EvalError> {
    if n_candidate == 0 {
        return Err(EvalError::ZeroCandidates);
    }
    if n_match > n_candidate {
        return Err(EvalError::MatchOverflow {
            n_match,
            total: n_candidate,
            what: "candidate",
        });
    }
    Ok(n_match as f64 / n_candidate as f64)
}

pub fn recall(n_match: usize, n_gt: usize) -> Result<f64, EvalError> {
    if n_gt == 0 {
        return Err(EvalError::ZeroGroundTruth);
    }
    if n_match > n_gt {
        return Err(EvalError::MatchOverflow {
            n_match,
            total: n_gt,
            what: "ground-truth",
        });
    }
    Ok(n_match as f64 / n_gt as f64)
}

/// Harmonic mean of precision and recall, evaluated as `2 / (1/p + 1/r)`;
/// 0 when either is 0.
pub fn f_measure(p: f64, r: f64) -> f64 {
    if p == 0.0 || r == 0.0 {
        0.0
    } else {
        2.0 / (p.recip() + r.recip())
    }
}

/// Size of a one-to-one matching over pairs with `distances[a][g] < delta`.
///
/// Admissible pairs are first taken greedily in ascending distance (ties by
/// auto index, then GT index). Augmenting paths then extend the matching, so the
/// count is the maximum matching size; greedy alone can stop short when an
/// early close pair blocks two later ones.
pub fn match_count_from_distances(distances: &[Vec<f64>], delta: f64) -> usize {
    let n_auto = distances.len();
    let n_gt = distances.first().map_or(0, Vec::len);
    let admissible: Vec<Vec<usize>> = distances
        .iter()
        .map(|row| (0..n_gt).filter(|&g| row[g] < delta).collect())
        .collect();

    let mut edges: Vec<(f64, usize, usize)> = admissible
        .iter()
        .enumerate()
        .flat_map(|(a, gs)| gs.iter().map(move |&g| (distances[a][g], a, g)))
        .collect();
    edges.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

    let mut auto_of_gt: Vec<Option<usize>> = vec![None; n_gt];
    let mut gt_of_auto: Vec<Option<usize>> = vec![None; n_auto];
    for (_, a, g) in edges {
        if gt_of_auto[a].is_none() && auto_of_gt[g].is_none() {
            gt_of_auto[a] = Some(g);
            auto_of_gt[g] = Some(a);
        }
    }

    fn augment(
        a: usize,
        admissible: &[Vec<usize>],
        auto_of_gt: &mut [Option<usize>],
        gt_of_auto: &mut [Option<usize>],
        visited: &mut [bool],
    ) -> bool {
        for &g in &admissible[a] {
            if visited[g] {
                continue;
            }
            visited[g] = true;
            let free = match auto_of_gt[g] {
                None => true,
                Some(other) => augment(other, admissible, auto_of_gt, gt_of_auto, visited),
            };
            if free {
                auto_of_gt[g] = Some(a);
                gt_of_auto[a] = Some(g);
                return true;
            }
        }
        false
    }

    for a in 0..n_auto {
        if gt_of_auto[a].is_none() {
            let mut visited = vec![false; n_gt];
            augment(a, &admissible, &mut auto_of_gt, &mut gt_of_auto, &mut visited);
        }
    }
    gt_of_auto.iter().filter(|m| m.is_some()).count()
}

pub fn match_count(auto: &[HueHistogram], gt: &[HueHistogram], delta: f64) -> Result<usize> {
    check_delta(delta)?;
    let distances = auto
        .iter()
        .map(|a| {
            gt.iter()
                .map(|g| color::histogram_dissimilarity(a, g))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(match_count_from_distances(&distances, delta))
}

fn check_delta(delta: f64) -> Result<(), EvalError> {
    if (0.0..=1.0).contains(&delta) {
        Ok(())
    } else {
        Err(EvalError::BadDelta(delta))
    }
}

pub fn match_histograms(images: &[RgbImage]) -> Vec<HueHistogram> {
    images
        .par_iter()
        .map(|img| color::hue_histogram(img, MATCH_BINS).expect("16 is an allowed bin count"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserScore {
    pub user_id: String,
    pub n_match: usize,
    pub n_candidate: usize,
    pub n_gt: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

/// How many keyframes were requested per annotator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KMode {
    /// k equals the annotator's ground-truth size.
    #[default]
    PerUser,
    /// One k for every annotator.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub video_id: String,
    pub config_digest: String,
    pub k_mode: KMode,
    pub per_user: Vec<UserScore>,
    pub mean_f: f64,
}

/// Score one summary against one annotator. An empty summary scores zero.
fn score_user(
    auto_hists: &[HueHistogram],
    gt: &GroundTruthSet,
    gt_hists: &[HueHistogram],
    delta: f64,
) -> Result<UserScore> {
    let n_match = match_count(auto_hists, gt_hists, delta)?;
    let n_candidate = auto_hists.len();
    let n_gt = gt_hists.len();
    let p = if n_candidate == 0 {
        0.0
    } else {
        precision(n_match, n_candidate)?
    };
    let r = recall(n_match, n_gt)?;
    Ok(UserScore {
        user_id: gt.user_id.clone(),
        n_match,
        n_candidate,
        n_gt,
        precision: p,
        recall: r,
        f_measure: f_measure(p, r),
    })
}

fn report(video_id: &str, k_mode: KMode, per_user: Vec<UserScore>) -> EvalReport {
    let mean_f = per_user.iter().map(|u| u.f_measure).sum::<f64>() / per_user.len() as f64;
    EvalReport {
        schema_version: crate::SCHEMA_VERSION,
        video_id: video_id.to_string(),
        config_digest: String::new(),
        k_mode,
        per_user,
        mean_f,
    }
}

fn keyframe_images(auto: &KeyframeSet, frames: &FrameSequence) -> Vec<RgbImage> {
    auto.positions.iter().map(|&p| frames.frames[p].clone()).collect()
}

/// Evaluate one fixed summary against every annotator.
pub fn evaluate_video(
    auto: &KeyframeSet,
    frames: &FrameSequence,
    gts: &[GroundTruthSet],
    delta: f64,
) -> Result<EvalReport> {
    check_delta(delta)?;
    if gts.is_empty() {
        return Err(EvalError::NoGroundTruth(frames.video_id.clone()).into());
    }
    let auto_hists = match_histograms(&keyframe_images(auto, frames));
    let per_user = gts
        .iter()
        .map(|gt| score_user(&auto_hists, gt, &match_histograms(&gt.frames), delta))
        .collect::<Result<Vec<_>>>()?;
    Ok(report(&frames.video_id, KMode::Fixed, per_user))
}

/// Evaluate with a separate summary per annotator, sized to that annotator's
/// ground truth.
pub fn evaluate_video_per_user_k(
    minima: &[Minimum],
    min_separation: f64,
    frames: &FrameSequence,
    gts: &[GroundTruthSet],
    delta: f64,
) -> Result<EvalReport> {
    check_delta(delta)?;
    if gts.is_empty() {
        return Err(EvalError::NoGroundTruth(frames.video_id.clone()).into());
    }
    let per_user = gts
        .iter()
        .map(|gt| {
            let k = gt.frames.len().max(1);
            let auto = selection::select_keyframes(minima, k, min_separation, frames)?;
            let auto_hists = match_histograms(&keyframe_images(&auto, frames));
            score_user(&auto_hists, gt, &match_histograms(&gt.frames), delta)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(report(&frames.video_id, KMode::PerUser, per_user))
}
