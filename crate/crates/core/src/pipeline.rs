//! End-to-end analysis of one video: scores, fusion, minima and keyframes.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::color;
use crate::error::{Error, Result};
use crate::evaluation::{KMode, DEFAULT_MATCH_DELTA};
use crate::flow::{self, LkParams, TemporalNorm};
use crate::fusion::{self, FinalScore, FusionOperator, FusionSpec};
use crate::ingest::{self, FrameSequence, VideoManifest};
use crate::saliency::{self, SaliencyProviderSpec};
use crate::selection::{self, KeyframeSet, Minimum};
use crate::score::ScoreSeries;

/// A per-pair score that can enter the fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Feature {
    /// Hue-histogram dissimilarity of the video frames.
    Hue,
    /// Lucas-Kanade motion between saliency maps.
    #[serde(alias = "saliency_flow")]
    SaliencyFlow,
}

/// Every tunable of the pipeline. Missing keys in a JSON config take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest_path: Option<PathBuf>,
    pub stride_seconds: f64,
    pub hue_bins: usize,
    pub features: Vec<Feature>,
    pub provider: SaliencyProviderSpec,
    pub lk: LkParams,
    pub temporal_norm: TemporalNorm,
    pub fusion: FusionSpec,
    pub k: usize,
    pub k_mode: KMode,
    pub min_separation: f64,
    pub prominence_min: f64,
    pub match_delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            manifest_path: None,
            stride_seconds: 1.0,
            hue_bins: color::DEFAULT_HUE_BINS,
            features: vec![Feature::Hue, Feature::SaliencyFlow],
            provider: SaliencyProviderSpec::default(),
            lk: LkParams::default(),
            temporal_norm: TemporalNorm::IouComplement,
            fusion: FusionSpec::default(),
            k: 5,
            k_mode: KMode::PerUser,
            min_separation: 1.0,
            prominence_min: 0.05,
            match_delta: DEFAULT_MATCH_DELTA,
            output_path: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.stride_seconds > 0.0) {
            return bad(format!("stride_seconds must be positive, got {}", self.stride_seconds));
        }
        color::check_bins(self.hue_bins)?;
        if self.features.is_empty() {
            return bad("features must name at least one score".into());
        }
        self.provider.validate().map_err(Error::Config)?;
        self.lk.validate()?;
        self.fusion.validate()?;
        if self.fusion.operator == FusionOperator::Linear
            && self.fusion.weights.as_ref().map(Vec::len) != Some(self.features.len())
        {
            return Err(crate::error::FusionError::MissingWeights(self.features.len()).into());
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if !(self.min_separation >= 0.0) {
            return bad(format!("min_separation must be >= 0, got {}", self.min_separation));
        }
        if !(self.prominence_min >= 0.0) {
            return bad(format!("prominence_min must be >= 0, got {}", self.prominence_min));
        }
        if !(0.0..=1.0).contains(&self.match_delta) {
            return bad(format!("match_delta must lie in [0, 1], got {}", self.match_delta));
        }
        Ok(())
    }

    /// Hash of every setting that changes results. Input and output locations
    /// are excluded so the same experiment run from two places compares equal.
    pub fn digest(&self) -> String {
        let mut decisions = self.clone();
        decisions.manifest_path = None;
        decisions.output_path = None;
        let canonical = serde_json::to_vec(&decisions).expect("config serializes");
        let hash = Sha256::digest(&canonical);
        hex::encode(&hash[..8])
    }
}

/// Everything computed for one video.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub frames: FrameSequence,
    pub provider: String,
    pub static_score: Option<ScoreSeries>,
    pub temporal_score: Option<ScoreSeries>,
    pub final_score: FinalScore,
    /// Minima that passed the prominence threshold.
    pub minima: Vec<Minimum>,
}

impl Analysis {
    pub fn select(&self, k: usize, min_separation: f64) -> Result<KeyframeSet> {
        Ok(selection::select_keyframes(&self.minima, k, min_separation, &self.frames)?)
    }
}

/// Analyze a video whose frames are already loaded.
pub fn analyze_frames(
    frames: FrameSequence,
    manifest: &VideoManifest,
    config: &PipelineConfig,
) -> Result<Analysis> {
    config.validate()?;
    let static_score = if config.features.contains(&Feature::Hue) {
        Some(color::static_score(&frames, config.hue_bins)?)
    } else {
        None
    };
    let (temporal_score, provider) = if config.features.contains(&Feature::SaliencyFlow) {
        let sal = saliency::provide_saliency(&config.provider, &frames, manifest)?;
        let series = flow::temporal_score(&sal, &config.lk, config.temporal_norm)?;
        (Some(series), sal.provider)
    } else {
        (None, "none".to_string())
    };

    let inputs: Vec<ScoreSeries> = config
        .features
        .iter()
        .map(|f| match f {
            Feature::Hue => static_score.clone(),
            Feature::SaliencyFlow => temporal_score.clone(),
        })
        .collect::<Option<Vec<_>>>()
        .expect("every requested feature was computed");
    let final_score = fusion::fuse(&inputs, &config.fusion)?;
    let values = &final_score.values.values;
    let minima = selection::local_minima(values)?;
    let minima = selection::filter_by_prominence(&minima, values, config.prominence_min);

    Ok(Analysis {
        frames,
        provider,
        static_score,
        temporal_score,
        final_score,
        minima,
    })
}

pub fn analyze(manifest: &VideoManifest, config: &PipelineConfig) -> Result<Analysis> {
    config.validate()?;
    let frames = ingest::load_frames(manifest, config.stride_seconds)?;
    analyze_frames(frames, manifest, config)
}
