//! Saliency maps and the providers that produce them.
//!
//! `Precomputed` reads maps written by an external eye-fixation model.
//! `SpectralResidual` is a classical in-process fallback so the pipeline runs
//! without any model on disk.

use image::{GrayImage, RgbImage};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ingest::{self, FrameSequence, VideoManifest};

pub const DEFAULT_SIGMA: f64 = 2.5;

/// Attention map with values in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

impl SaliencyMap {
    /// Values are clamped into `[0, 1]`.
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Self {
        assert_eq!(values.len(), width * height, "map size does not match dimensions");
        let values = values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Self {
            width,
            height,
            values,
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f32) -> Self {
        let values = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::new(width, height, values)
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![0.0; width * height])
    }

    pub fn from_luma8(img: &GrayImage) -> Self {
        let (w, h) = img.dimensions();
        let values = img.as_raw().iter().map(|&v| f32::from(v) / 255.0).collect();
        Self::new(w as usize, h as usize, values)
    }

    /// Quantize to 8 bits (`round(v * 255)`), the interchange encoding.
    pub fn to_luma8(&self) -> GrayImage {
        let raw = self.values.iter().map(|&v| (v * 255.0).round() as u8).collect();
        GrayImage::from_raw(self.width as u32, self.height as u32, raw)
            .expect("buffer length matches dimensions")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.width + x]
    }
}

/// Maps aligned one-to-one with a frame sequence.
#[derive(Debug, Clone)]
pub struct SaliencySequence {
    pub video_id: String,
    pub maps: Vec<SaliencyMap>,
    pub indices: Vec<u64>,
    /// Name of the provider that produced the maps.
    pub provider: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SaliencyProviderSpec {
    #[serde(alias = "precomputed")]
    Precomputed,
    #[serde(alias = "spectral_residual")]
    SpectralResidual {
        #[serde(default = "default_sigma")]
        sigma: f64,
    },
}

fn default_sigma() -> f64 {
    DEFAULT_SIGMA
}

impl Default for SaliencyProviderSpec {
    fn default() -> Self {
        SaliencyProviderSpec::SpectralResidual {
            sigma: DEFAULT_SIGMA,
        }
    }
}

impl SaliencyProviderSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SaliencyProviderSpec::Precomputed => "precomputed",
            SaliencyProviderSpec::SpectralResidual { .. } => "spectral-residual",
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        match *self {
            SaliencyProviderSpec::SpectralResidual { sigma } if !(sigma > 0.0) => {
                Err(format!("saliency sigma must be positive, got {sigma}"))
            }
            _ => Ok(()),
        }
    }
}

pub fn provide_saliency(
    spec: &SaliencyProviderSpec,
    frames: &FrameSequence,
    manifest: &VideoManifest,
) -> Result<SaliencySequence> {
    match *spec {
        SaliencyProviderSpec::Precomputed => ingest::load_saliency(manifest, frames),
        SaliencyProviderSpec::SpectralResidual { sigma } => Ok(SaliencySequence {
            video_id: frames.video_id.clone(),
            maps: frames
                .frames
                .par_iter()
                .map(|f| spectral_residual_saliency(f, sigma))
                .collect(),
            indices: frames.indices.clone(),
            provider: spec.name().to_string(),
        }),
    }
}

/// Rec. 601 luma in `[0, 255]`.
fn grayscale(frame: &RgbImage) -> Vec<f64> {
    frame
        .pixels()
        .map(|p| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]))
        .collect()
}

/// In-place 2-D FFT over a row-major `width x height` buffer.
fn fft_2d(data: &mut [Complex<f64>], width: usize, height: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(width), planner.plan_fft_inverse(height))
    } else {
        (planner.plan_fft_forward(width), planner.plan_fft_forward(height))
    };
    for row in data.chunks_exact_mut(width) {
        row_fft.process(row);
    }
    let mut column = vec![Complex::new(0.0, 0.0); height];
    for x in 0..width {
        for y in 0..height {
            column[y] = data[y * width + x];
        }
        col_fft.process(&mut column);
        for y in 0..height {
            data[y * width + x] = column[y];
        }
    }
}

/// Amplitude floor as a fraction of the spectral peak.
const AMPLITUDE_FLOOR: f64 = 1e-3;

/// 3x3 box mean with wrap-around (the spectrum is periodic).
fn box3_periodic(src: &[f64], width: usize, height: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for dy in [height - 1, 0, 1] {
                let yy = (y + dy) % height;
                for dx in [width - 1, 0, 1] {
                    let xx = (x + dx) % width;
                    acc += src[yy * width + xx];
                }
            }
            out[y * width + x] = acc / 9.0;
        }
    }
    out
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as usize;
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable Gaussian blur with clamped borders.
pub fn gaussian_blur(src: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; src.len()];
    for y in 0..height {
        for x in 0..width {
            tmp[y * width + x] = kernel
                .iter()
                .enumerate()
                .map(|(i, k)| k * src[y * width + clamp(x as isize + i as isize - radius, width)])
                .sum();
        }
    }
    let mut out = vec![0.0; src.len()];
    for y in 0..height {
        for x in 0..width {
            out[y * width + x] = kernel
                .iter()
                .enumerate()
                .map(|(i, k)| k * tmp[clamp(y as isize + i as isize - radius, height) * width + x])
                .sum();
        }
    }
    out
}

/// Spectral-residual saliency: the log-amplitude spectrum minus its 3x3 local
/// mean, recombined with the original phase, inverted, squared, blurred and
/// min-max normalized. Constant frames give an all-zero map.
pub fn spectral_residual_saliency(frame: &RgbImage, sigma: f64) -> SaliencyMap {
    let (w, h) = frame.dimensions();
    let (width, height) = (w as usize, h as usize);
    let gray = grayscale(frame);
    let first = gray.first().copied().unwrap_or(0.0);
    if gray.iter().all(|&v| v == first) {
        return SaliencyMap::zeros(width, height);
    }

    let mut spectrum: Vec<Complex<f64>> = gray.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft_2d(&mut spectrum, width, height, false);

    // Floor relative to the peak so exact spectral zeros do not dominate the residual.
    let peak = spectrum.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let floor = peak * AMPLITUDE_FLOOR;
    let log_amp: Vec<f64> = spectrum.iter().map(|c| (c.norm() + floor).ln()).collect();
    let smoothed = box3_periodic(&log_amp, width, height);
    let mut residual: Vec<Complex<f64>> = spectrum
        .iter()
        .zip(log_amp.iter().zip(&smoothed))
        .map(|(c, (&la, &sm))| Complex::from_polar((la - sm).exp(), c.arg()))
        .collect();
    fft_2d(&mut residual, width, height, true);

    let energy: Vec<f64> = residual.iter().map(|c| c.norm_sqr()).collect();
    let blurred = gaussian_blur(&energy, width, height, sigma);
    let (lo, hi) = blurred
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if !(range > 0.0) {
        return SaliencyMap::zeros(width, height);
    }
    let values = blurred.iter().map(|&v| ((v - lo) / range) as f32).collect();
    SaliencyMap::new(width, height, values)
}
