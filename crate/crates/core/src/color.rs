//! Hue histograms and the normalized histogram-intersection dissimilarity.

use image::{Rgb, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ColorError;
use crate::ingest::FrameSequence;
use crate::score::{consecutive_pairs, ScoreSeries};

pub const ALLOWED_BINS: [usize; 5] = [4, 8, 16, 32, 64];
pub const DEFAULT_HUE_BINS: usize = 8;

/// A pixel in HSV: hue in degrees `[0, 360)`, saturation and value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hsv {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

/// Hexcone conversion. Achromatic pixels (`s == 0`) get hue 0.
pub fn rgb_to_hsv(px: Rgb<u8>) -> Hsv {
    let [r, g, b] = px.0.map(|c| f64::from(c) / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let chroma = max - min;
    let v = max;
    let s = if max > 0.0 { chroma / max } else { 0.0 };
    if chroma == 0.0 {
        return Hsv { h: 0.0, s, v };
    }
    let sector = if max == r {
        ((g - b) / chroma).rem_euclid(6.0)
    } else if max == g {
        (b - r) / chroma + 2.0
    } else {
        (r - g) / chroma + 4.0
    };
    let h = (sector * 60.0).rem_euclid(360.0);
    Hsv { h, s, v }
}

/// Per-pixel HSV planes of an image, row-major.
pub fn image_to_hsv(frame: &RgbImage) -> Vec<Hsv> {
    frame.pixels().map(|&p| rgb_to_hsv(p)).collect()
}

/// L1-normalized hue histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HueHistogram {
    bins: Vec<f64>,
}

impl HueHistogram {
    /// Wrap normalized bin masses; the length must be an allowed bin count.
    pub fn from_bins(bins: Vec<f64>) -> Result<Self, ColorError> {
        check_bins(bins.len())?;
        Ok(Self { bins })
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    pub fn n(&self) -> usize {
        self.bins.len()
    }
}

pub fn check_bins(n: usize) -> Result<(), ColorError> {
    if ALLOWED_BINS.contains(&n) {
        Ok(())
    } else {
        Err(ColorError::BadBinCount(n))
    }
}

/// Bin of a hue in degrees: `floor(h / (360 / n))`, clamped to `n - 1`.
pub fn hue_bin(h: f64, n: usize) -> usize {
    let width = 360.0 / n as f64;
    ((h / width).floor() as usize).min(n - 1)
}

pub fn hue_histogram(frame: &RgbImage, n: usize) -> Result<HueHistogram, ColorError> {
    check_bins(n)?;
    let mut counts = vec![0u64; n];
    for &px in frame.pixels() {
        counts[hue_bin(rgb_to_hsv(px).h, n)] += 1;
    }
    let total: u64 = counts.iter().sum();
    let bins = if total == 0 {
        vec![0.0; n]
    } else {
        counts.iter().map(|&c| c as f64 / total as f64).collect()
    };
    Ok(HueHistogram { bins })
}

/// `1 - mean_b(min(h1_b, h2_b) / max(h1_b, h2_b))` over the bins occupied in at
/// least one histogram. Bins empty in both carry no evidence either way and are
/// left out of the mean. Symmetric, in `[0, 1]`, zero on equal input.
pub fn histogram_dissimilarity(h1: &HueHistogram, h2: &HueHistogram) -> Result<f64, ColorError> {
    if h1.n() != h2.n() {
        return Err(ColorError::BinMismatch(h1.n(), h2.n()));
    }
    Ok(ratio_dissimilarity(&h1.bins, &h2.bins))
}

pub(crate) fn ratio_dissimilarity(a: &[f64], b: &[f64]) -> f64 {
    let (ratio_sum, occupied) = a
        .iter()
        .zip(b)
        .filter(|(x, y)| x.max(**y) > 0.0)
        .fold((0.0, 0usize), |(sum, n), (&x, &y)| (sum + x.min(y) / x.max(y), n + 1));
    if occupied == 0 {
        return 0.0;
    }
    (1.0 - ratio_sum / occupied as f64).clamp(0.0, 1.0)
}

/// Histogram dissimilarity between each consecutive frame pair.
pub fn static_score(frames: &FrameSequence, n: usize) -> Result<ScoreSeries, ColorError> {
    check_bins(n)?;
    if frames.len() < 2 {
        return Err(ColorError::TooFewFrames(frames.len()));
    }
    let hists = frames
        .frames
        .par_iter()
        .map(|f| hue_histogram(f, n))
        .collect::<Result<Vec<_>, _>>()?;
    let values = hists
        .windows(2)
        .map(|w| histogram_dissimilarity(&w[0], &w[1]))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ScoreSeries::new(
        format!("hue{n}"),
        values,
        consecutive_pairs(&frames.indices),
    ))
}
