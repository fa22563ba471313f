//! Manifests, frame sequences, saliency maps and ground-truth summaries on disk.
//!
//! Frames are pre-extracted image files whose stems end in the original frame
//! number (`frame_000030.png`, `Frame3331.jpeg`). Saliency maps use the same
//! naming in a separate directory, as 8-bit PGM (P5) or grayscale PNG.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, IngestError, Result};
use crate::saliency::{SaliencyMap, SaliencySequence};

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "ppm", "pgm", "pnm"];
const MAP_EXTENSIONS: &[&str] = &["pgm", "png"];

/// One video's inputs. Relative paths are resolved against the manifest file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoManifest {
    pub video_id: String,
    pub frame_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saliency_dir: Option<PathBuf>,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub gt_dirs: Vec<PathBuf>,
}

#[derive(Debug, Deserialize)]
struct RawManifest {
    video_id: Option<String>,
    frame_dir: Option<PathBuf>,
    saliency_dir: Option<PathBuf>,
    fps: Option<f64>,
    width: Option<i64>,
    height: Option<i64>,
    gt_dirs: Option<Vec<PathBuf>>,
}

/// Frames sampled from one video.
#[derive(Debug, Clone)]
pub struct FrameSequence {
    pub video_id: String,
    pub frames: Vec<RgbImage>,
    /// Original frame numbers, strictly increasing.
    pub indices: Vec<u64>,
    /// Source frames between consecutive samples.
    pub sample_stride: usize,
    pub fps: f64,
}

impl FrameSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dimensions(&self) -> (u32, u32) {
        self.frames.first().map_or((0, 0), |f| f.dimensions())
    }

    /// Timestamp of an original frame number, in seconds.
    pub fn seconds(&self, frame_index: u64) -> f64 {
        frame_index as f64 / self.fps
    }

    pub fn position_of(&self, frame_index: u64) -> Option<usize> {
        self.indices.binary_search(&frame_index).ok()
    }
}

/// One annotator's keyframes.
#[derive(Debug, Clone)]
pub struct GroundTruthSet {
    pub user_id: String,
    pub frame_indices: Vec<u64>,
    pub frames: Vec<RgbImage>,
}

/// Load and validate a single-video manifest.
pub fn load_manifest(path: &Path) -> Result<VideoManifest> {
    let value = read_json(path)?;
    manifest_from_value(path, value)
}

/// Load a dataset manifest: a JSON array of video manifests. A single object is
/// accepted as a one-video dataset.
pub fn load_dataset_manifest(path: &Path) -> Result<Vec<VideoManifest>> {
    match read_json(path)? {
        serde_json::Value::Array(items) => items
            .into_iter()
            .map(|item| manifest_from_value(path, item))
            .collect(),
        other => Ok(vec![manifest_from_value(path, other)?]),
    }
}

fn read_json(path: &Path) -> Result<serde_json::Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        IngestError::Parse {
            path: path.to_path_buf(),
            reason: e.to_string(),
        }
        .into()
    })
}

fn manifest_from_value(path: &Path, value: serde_json::Value) -> Result<VideoManifest> {
    let raw: RawManifest = serde_json::from_value(value).map_err(|e| IngestError::Parse {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let missing = |field| IngestError::MissingField {
        path: path.to_path_buf(),
        field,
    };
    let video_id = raw.video_id.ok_or_else(|| missing("video_id"))?;
    let frame_dir = raw.frame_dir.ok_or_else(|| missing("frame_dir"))?;
    let fps = raw.fps.ok_or_else(|| missing("fps"))?;
    let width = raw.width.ok_or_else(|| missing("width"))?;
    let height = raw.height.ok_or_else(|| missing("height"))?;
    let gt_dirs = raw.gt_dirs.unwrap_or_default();

    if !(fps > 0.0) || !fps.is_finite() {
        return Err(IngestError::NonPositiveFps {
            path: path.to_path_buf(),
            fps,
        }
        .into());
    }
    let dimension = |field: &'static str, v: i64| -> Result<u32> {
        u32::try_from(v).ok().filter(|&v| v > 0).ok_or_else(|| {
            IngestError::InvalidField {
                path: path.to_path_buf(),
                field,
                reason: format!("must be a positive integer, got {v}"),
            }
            .into()
        })
    };
    let width = dimension("width", width)?;
    let height = dimension("height", height)?;

    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let frame_dir = existing_dir(base, &frame_dir, "frame_dir".to_string())?;
    let saliency_dir = raw
        .saliency_dir
        .map(|d| existing_dir(base, &d, "saliency_dir".to_string()))
        .transpose()?;
    let mut seen = HashSet::new();
    let mut resolved_gt = Vec::with_capacity(gt_dirs.len());
    for (i, dir) in gt_dirs.iter().enumerate() {
        let dir = existing_dir(base, dir, format!("gt_dirs[{i}]"))?;
        if !seen.insert(dir.clone()) {
            return Err(IngestError::InvalidField {
                path: path.to_path_buf(),
                field: "gt_dirs",
                reason: format!("{} listed twice", dir.display()),
            }
            .into());
        }
        resolved_gt.push(dir);
    }

    Ok(VideoManifest {
        video_id,
        frame_dir,
        saliency_dir,
        fps,
        width,
        height,
        gt_dirs: resolved_gt,
    })
}

fn existing_dir(base: &Path, dir: &Path, field: String) -> Result<PathBuf> {
    let full = if dir.is_absolute() {
        dir.to_path_buf()
    } else {
        base.join(dir)
    };
    if full.is_dir() {
        Ok(full)
    } else {
        Err(IngestError::BadPath { field, path: full }.into())
    }
}

/// Trailing decimal digits of a file stem, e.g. `frame_000030` -> 30.
pub fn frame_index_from_name(path: &Path) -> Option<u64> {
    let stem = path.file_stem()?.to_str()?;
    let digits_start = stem
        .char_indices()
        .rev()
        .take_while(|(_, c)| c.is_ascii_digit())
        .last()
        .map(|(i, _)| i)?;
    stem[digits_start..].parse().ok()
}

/// Image files in `dir` keyed by the frame index in their name.
pub fn indexed_files(dir: &Path, extensions: &[&str]) -> Result<BTreeMap<u64, PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext_ok = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| extensions.contains(&e.to_ascii_lowercase().as_str()));
        if !ext_ok || !path.is_file() {
            continue;
        }
        let Some(index) = frame_index_from_name(&path) else {
            continue;
        };
        if files.insert(index, path).is_some() {
            return Err(IngestError::DuplicateIndex {
                dir: dir.to_path_buf(),
                index,
            }
            .into());
        }
    }
    Ok(files)
}

/// Source-frame step for a sampling interval: `round(fps * stride_seconds)`, at least 1.
pub fn sample_step(fps: f64, stride_seconds: f64) -> usize {
    ((fps * stride_seconds).round() as usize).max(1)
}

/// Load frames, keeping every `round(fps * stride_seconds)`-th file starting with the first.
pub fn load_frames(manifest: &VideoManifest, stride_seconds: f64) -> Result<FrameSequence> {
    if !(stride_seconds > 0.0) || !stride_seconds.is_finite() {
        return Err(IngestError::NonPositiveStride(stride_seconds).into());
    }
    let step = sample_step(manifest.fps, stride_seconds);
    let files = indexed_files(&manifest.frame_dir, IMAGE_EXTENSIONS)?;
    let selected: Vec<(u64, PathBuf)> = files.into_iter().step_by(step).collect();
    if selected.len() < 2 {
        return Err(IngestError::TooFewFrames {
            dir: manifest.frame_dir.clone(),
            found: selected.len(),
        }
        .into());
    }
    let frames = selected
        .par_iter()
        .map(|(index, path)| {
            let frame = decode_rgb(path)?;
            let (w, h) = frame.dimensions();
            if (w, h) != (manifest.width, manifest.height) {
                return Err(IngestError::FrameSize {
                    dir: manifest.frame_dir.clone(),
                    index: *index,
                    found_w: w,
                    found_h: h,
                    expected_w: manifest.width,
                    expected_h: manifest.height,
                }
                .into());
            }
            Ok(frame)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FrameSequence {
        video_id: manifest.video_id.clone(),
        frames,
        indices: selected.into_iter().map(|(i, _)| i).collect(),
        sample_stride: step,
        fps: manifest.fps,
    })
}

pub fn decode_rgb(path: &Path) -> Result<RgbImage> {
    image::open(path)
        .map(|img| img.into_rgb8())
        .map_err(|e| {
            IngestError::DecodeError {
                path: path.to_path_buf(),
                reason: e.to_string(),
            }
            .into()
        })
}

/// Load one precomputed map per sampled frame, scaled from `0..=255` to `[0, 1]`.
pub fn load_saliency(manifest: &VideoManifest, frames: &FrameSequence) -> Result<SaliencySequence> {
    let dir = manifest
        .saliency_dir
        .as_ref()
        .ok_or_else(|| IngestError::NoSaliencyDir(manifest.video_id.clone()))?;
    let files = indexed_files(dir, MAP_EXTENSIONS)?;
    let (frame_w, frame_h) = frames.dimensions();
    let maps = frames
        .indices
        .par_iter()
        .map(|&index| {
            let path = files.get(&index).ok_or(IngestError::MissingMap(index))?;
            let gray = image::open(path)
                .map_err(|e| IngestError::DecodeError {
                    path: path.clone(),
                    reason: e.to_string(),
                })?
                .into_luma8();
            let (w, h) = gray.dimensions();
            if (w, h) != (frame_w, frame_h) {
                return Err(IngestError::SizeMismatch {
                    index,
                    map_w: w,
                    map_h: h,
                    frame_w,
                    frame_h,
                }
                .into());
            }
            Ok(SaliencyMap::from_luma8(&gray))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SaliencySequence {
        video_id: frames.video_id.clone(),
        maps,
        indices: frames.indices.clone(),
        provider: "precomputed".to_string(),
    })
}

/// Load an annotator's summary; `user_id` is the directory name.
pub fn load_ground_truth(dir: &Path) -> Result<GroundTruthSet> {
    let files = indexed_files(dir, IMAGE_EXTENSIONS)?;
    if files.is_empty() {
        return Err(IngestError::EmptyGroundTruth(dir.to_path_buf()).into());
    }
    let user_id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    let frames = files
        .par_iter()
        .map(|(_, path)| decode_rgb(path))
        .collect::<Result<Vec<_>>>()?;
    Ok(GroundTruthSet {
        user_id,
        frame_indices: files.into_keys().collect(),
        frames,
    })
}

pub fn load_all_ground_truth(manifest: &VideoManifest) -> Result<Vec<GroundTruthSet>> {
    manifest.gt_dirs.iter().map(|d| load_ground_truth(d)).collect()
}
