//! Synthetic videos with known change points, written in the on-disk layout
//! the ingestion module reads.
//!
//! Color scenes: each scene has a solid background and a second-hue stripe that
//! widens from the left edge. The stripe grows fast near the scene boundaries
//! and slowly mid-scene, so every scene holds one clear valley of the score
//! signal, and each cut switches both hues. Scenes of up to 20 frames fit the
//! default 160-pixel width without clamping.

use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::VideoManifest;
use crate::saliency::{self, SaliencyMap};

/// Background and stripe colors of one scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenePalette {
    pub background: Rgb<u8>,
    pub stripe: Rgb<u8>,
}

/// Red/yellow, green/cyan, blue/magenta: six distinct hue bins at 8 bins.
pub const RGB_SCENES: [ScenePalette; 3] = [
    ScenePalette {
        background: Rgb([255, 0, 0]),
        stripe: Rgb([255, 255, 0]),
    },
    ScenePalette {
        background: Rgb([0, 255, 0]),
        stripe: Rgb([0, 255, 255]),
    },
    ScenePalette {
        background: Rgb([0, 0, 255]),
        stripe: Rgb([255, 0, 255]),
    },
];

#[derive(Debug, Clone)]
pub struct SyntheticVideo {
    pub video_id: String,
    pub frames: Vec<RgbImage>,
    /// Frame ranges of each scene.
    pub scenes: Vec<Range<usize>>,
    pub fps: f64,
}

/// Parameters of a color-scene video.
#[derive(Debug, Clone)]
pub struct ColorSceneSpec {
    pub video_id: String,
    pub palettes: Vec<ScenePalette>,
    pub frames_per_scene: usize,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
}

impl Default for ColorSceneSpec {
    fn default() -> Self {
        Self {
            video_id: "synthetic-3scene".to_string(),
            palettes: RGB_SCENES.to_vec(),
            frames_per_scene: 20,
            width: 160,
            height: 48,
            fps: 1.0,
        }
    }
}

/// Stripe width in columns for each frame of a scene. Growth per frame is
/// `1 + |2t - (len - 1)| / 2` columns: fast at the scene edges, one column
/// mid-scene. Clamped to leave a background margin.
fn stripe_schedule(len: usize, width: u32) -> Vec<u32> {
    let max = width.saturating_sub(STRIPE_MARGIN).max(STRIPE_START + 1);
    let mut columns = STRIPE_START;
    (0..len)
        .map(|t| {
            let current = columns.min(max);
            columns += 1 + ((2 * t) as i64 - (len as i64 - 1)).unsigned_abs() as u32 / 2;
            current
        })
        .collect()
}

const STRIPE_START: u32 = 16;
const STRIPE_MARGIN: u32 = 16;

/// Frame whose leftmost `columns` columns use the stripe color.
fn stripe_frame(palette: ScenePalette, width: u32, height: u32, columns: u32) -> RgbImage {
    RgbImage::from_fn(width, height, |x, _| {
        if x < columns {
            palette.stripe
        } else {
            palette.background
        }
    })
}

pub fn color_scene_video(spec: &ColorSceneSpec) -> SyntheticVideo {
    let schedule = stripe_schedule(spec.frames_per_scene, spec.width);
    let mut frames = Vec::with_capacity(spec.palettes.len() * spec.frames_per_scene);
    let mut scenes = Vec::with_capacity(spec.palettes.len());
    for palette in &spec.palettes {
        let start = frames.len();
        frames.extend(
            schedule
                .iter()
                .map(|&c| stripe_frame(*palette, spec.width, spec.height, c)),
        );
        scenes.push(start..frames.len());
    }
    SyntheticVideo {
        video_id: spec.video_id.clone(),
        frames,
        scenes,
        fps: spec.fps,
    }
}

/// A bright Gaussian blob drifting over a dark background. At each change
/// point the blob jumps to a new start position and reverses direction.
pub fn moving_blob_video(
    width: u32,
    height: u32,
    frames_per_scene: usize,
    scenes: usize,
    speed: f64,
) -> (SyntheticVideo, Vec<SaliencyMap>) {
    let sigma = f64::from(width.min(height)) / 10.0;
    let mut frames = Vec::new();
    let mut maps = Vec::new();
    let mut ranges = Vec::new();
    for s in 0..scenes {
        let start = frames.len();
        let (x0, dir) = if s % 2 == 0 {
            (f64::from(width) * 0.3, 1.0)
        } else {
            (f64::from(width) * 0.7, -1.0)
        };
        let cy = f64::from(height) * if s % 2 == 0 { 0.35 } else { 0.65 };
        for t in 0..frames_per_scene {
            let cx = x0 + dir * speed * t as f64;
            let intensity = move |x: u32, y: u32| {
                let d2 = (f64::from(x) - cx).powi(2) + (f64::from(y) - cy).powi(2);
                (-d2 / (2.0 * sigma * sigma)).exp()
            };
            frames.push(RgbImage::from_fn(width, height, |x, y| {
                Rgb([(255.0 * intensity(x, y)).round() as u8; 3])
            }));
            maps.push(SaliencyMap::from_fn(width as usize, height as usize, |x, y| {
                intensity(x as u32, y as u32) as f32
            }));
        }
        ranges.push(start..frames.len());
    }
    let video = SyntheticVideo {
        video_id: "synthetic-blob".to_string(),
        frames,
        scenes: ranges,
        fps: 1.0,
    };
    (video, maps)
}

/// Ground-truth picks for `users` annotators: the middle frame of every scene,
/// nudged by the annotator number.
pub fn ground_truth_picks(video: &SyntheticVideo, users: usize) -> Vec<Vec<usize>> {
    (0..users)
        .map(|u| {
            video
                .scenes
                .iter()
                .map(|r| {
                    let mid = r.start + r.len() / 2;
                    let offset = u as isize - users as isize / 2;
                    (mid as isize + offset).clamp(r.start as isize, r.end as isize - 1) as usize
                })
                .collect()
        })
        .collect()
}

#[derive(Serialize)]
struct ManifestFile<'a> {
    video_id: &'a str,
    frame_dir: &'a str,
    saliency_dir: &'a str,
    fps: f64,
    width: u32,
    height: u32,
    gt_dirs: Vec<String>,
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn save(img: &image::DynamicImage, path: &Path) -> Result<()> {
    img.save(path)
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))
}

/// Write frames, saliency maps (PGM), ground-truth directories and
/// `manifest.json` under `root`. Without `maps`, spectral-residual maps are
/// written. Returns the manifest path.
pub fn write_video(
    video: &SyntheticVideo,
    maps: Option<&[SaliencyMap]>,
    root: &Path,
    users: usize,
) -> Result<PathBuf> {
    let frame_dir = root.join("frames");
    let sal_dir = root.join("saliency");
    create_dir(&frame_dir)?;
    create_dir(&sal_dir)?;
    for (i, frame) in video.frames.iter().enumerate() {
        save(
            &image::DynamicImage::ImageRgb8(frame.clone()),
            &frame_dir.join(format!("frame_{i:06}.png")),
        )?;
        let map = match maps {
            Some(maps) => maps[i].clone(),
            None => saliency::spectral_residual_saliency(frame, saliency::DEFAULT_SIGMA),
        };
        save(
            &image::DynamicImage::ImageLuma8(map.to_luma8()),
            &sal_dir.join(format!("frame_{i:06}.pgm")),
        )?;
    }
    let mut gt_dirs = Vec::with_capacity(users);
    for (u, picks) in ground_truth_picks(video, users).iter().enumerate() {
        let name = format!("gt/user{}", u + 1);
        let dir = root.join(&name);
        create_dir(&dir)?;
        for &p in picks {
            save(
                &image::DynamicImage::ImageRgb8(video.frames[p].clone()),
                &dir.join(format!("Frame{p}.png")),
            )?;
        }
        gt_dirs.push(name);
    }
    let (width, height) = video.frames[0].dimensions();
    let manifest = ManifestFile {
        video_id: &video.video_id,
        frame_dir: "frames",
        saliency_dir: "saliency",
        fps: video.fps,
        width,
        height,
        gt_dirs,
    };
    let path = root.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Write `videos` color-scene videos (scene order rotated, lengths varied) and a
/// `dataset.json` listing them. Returns the dataset manifest path.
pub fn write_dataset(root: &Path, videos: usize, users: usize) -> Result<PathBuf> {
    create_dir(root)?;
    let mut entries = Vec::with_capacity(videos);
    for v in 0..videos {
        let mut palettes = RGB_SCENES.to_vec();
        palettes.rotate_left(v % 3);
        let spec = ColorSceneSpec {
            video_id: format!("syn{:02}", v + 1),
            palettes,
            frames_per_scene: 16 + 2 * (v % 3),
            ..ColorSceneSpec::default()
        };
        let dir = root.join(&spec.video_id);
        let manifest_path = write_video(&color_scene_video(&spec), None, &dir, users)?;
        let mut manifest = crate::ingest::load_manifest(&manifest_path)?;
        relativize(&mut manifest, root);
        entries.push(manifest);
    }
    let path = root.join("dataset.json");
    let text = serde_json::to_string_pretty(&entries).expect("dataset serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn relativize(m: &mut VideoManifest, root: &Path) {
    let rel = |p: &Path| p.strip_prefix(root).map(Path::to_path_buf).unwrap_or_else(|_| p.to_path_buf());
    m.frame_dir = rel(&m.frame_dir);
    m.saliency_dir = m.saliency_dir.as_deref().map(rel);
    m.gt_dirs = m.gt_dirs.iter().map(|d| rel(d)).collect();
}
