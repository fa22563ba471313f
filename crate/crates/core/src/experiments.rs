//! Run-level entry points: summarize one video, evaluate a dataset, and run
//! comparison grids of config variants. All artifacts land under the
//! configured output directory.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::evaluation::{self, EvalReport, KMode};
use crate::fusion::FusionOperator;
use crate::ingest::{self, VideoManifest};
use crate::pipeline::{self, Analysis, PipelineConfig};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "SALSUM_THREADS";

/// Thread cap from `SALSUM_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Install the global rayon pool honoring `SALSUM_THREADS`. Later calls are no-ops.
pub fn init_thread_pool() {
    if let Some(n) = threads_from_env() {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Interpretation choices that affect results, copied into every summary.
pub const METHOD_NOTES: &[&str] = &[
    "achromatic pixels are binned at hue 0",
    "histogram dissimilarity averages min/max ratios over bins occupied in either frame",
    "temporal score aggregates the mean magnitude over well-conditioned LK windows",
    "exponential fusion uses d_t = max(S1_t, S2_t) - min(S1_t, S2_t) per pair",
    "logarithmic fusion uses scalar w_i = log(1 / (var(S_i) + eps)) per series",
    "pair j maps to the later frame j + 1",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyframeRecord {
    pub frame_index: u64,
    pub pair_index: usize,
    pub seconds: f64,
    pub score: f64,
    pub prominence: f64,
    pub image: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryReport {
    pub schema_version: u32,
    pub video_id: String,
    pub config_digest: String,
    pub provider: String,
    pub sample_stride: usize,
    pub frames_sampled: usize,
    pub fusion: String,
    pub temporal_norm: String,
    pub k_requested: usize,
    /// Fewer candidates than `k_requested`.
    pub short: bool,
    pub keyframes: Vec<KeyframeRecord>,
    pub notes: Vec<String>,
    pub config: PipelineConfig,
}

fn require_path<'a>(p: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("{name} is required")))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Per-pair static, temporal and final traces as CSV.
pub fn write_traces(analysis: &Analysis, path: &Path) -> Result<()> {
    let fin = &analysis.final_score.values;
    let header = ["pair_index", "frame_a", "frame_b", "static", "temporal", "final"]
        .map(String::from)
        .to_vec();
    let rows: Vec<Vec<String>> = (0..fin.len())
        .map(|j| {
            let (a, b) = fin.pair_indices[j];
            vec![
                j.to_string(),
                a.to_string(),
                b.to_string(),
                opt(analysis.static_score.as_ref().map(|s| s.values[j])),
                opt(analysis.temporal_score.as_ref().map(|s| s.values[j])),
                fin.values[j].to_string(),
            ]
        })
        .collect();
    write_csv(path, &header, &rows)
}

/// Summarize the single video named by `config.manifest_path` and write
/// `summary.json`, `traces.csv`, `config.json` and `keyframes/*.png` to
/// `config.output_path`.
pub fn run_summarize(config: &PipelineConfig) -> Result<SummaryReport> {
    config.validate()?;
    let manifest = ingest::load_manifest(require_path(&config.manifest_path, "manifest_path")?)?;
    let out = require_path(&config.output_path, "output_path")?;
    let analysis = pipeline::analyze(&manifest, config)?;
    let keys = analysis.select(config.k, config.min_separation)?;

    let key_dir = out.join("keyframes");
    create_dir(&key_dir)?;
    let mut records = Vec::with_capacity(keys.len());
    for i in 0..keys.len() {
        let frame_index = keys.frame_indices[i];
        let name = format!("keyframe_{frame_index:06}.png");
        let path = key_dir.join(&name);
        analysis.frames.frames[keys.positions[i]]
            .save(&path)
            .map_err(|e| Error::io(&path, std::io::Error::other(e.to_string())))?;
        records.push(KeyframeRecord {
            frame_index,
            pair_index: keys.pair_indices[i],
            seconds: analysis.frames.seconds(frame_index),
            score: keys.scores[i],
            prominence: keys.prominences[i],
            image: format!("keyframes/{name}"),
        });
    }

    let report = SummaryReport {
        schema_version: crate::SCHEMA_VERSION,
        video_id: manifest.video_id.clone(),
        config_digest: config.digest(),
        provider: analysis.provider.clone(),
        sample_stride: analysis.frames.sample_stride,
        frames_sampled: analysis.frames.len(),
        fusion: config.fusion.operator.name().to_string(),
        temporal_norm: config.temporal_norm.name().to_string(),
        k_requested: config.k,
        short: keys.is_short(),
        keyframes: records,
        notes: METHOD_NOTES.iter().map(|s| s.to_string()).collect(),
        config: config.clone(),
    };
    write_traces(&analysis, &out.join("traces.csv"))?;
    write_json(&out.join("summary.json"), &report)?;
    write_json(&out.join("config.json"), config)?;
    Ok(report)
}

/// Evaluate one video under `config`.
pub fn evaluate_manifest(manifest: &VideoManifest, config: &PipelineConfig) -> Result<EvalReport> {
    if manifest.gt_dirs.is_empty() {
        return Err(Error::Config(format!(
            "video {} has no gt_dirs to evaluate against",
            manifest.video_id
        )));
    }
    let gts = ingest::load_all_ground_truth(manifest)?;
    let analysis = pipeline::analyze(manifest, config)?;
    let mut report = match config.k_mode {
        KMode::PerUser => evaluation::evaluate_video_per_user_k(
            &analysis.minima,
            config.min_separation,
            &analysis.frames,
            &gts,
            config.match_delta,
        )?,
        KMode::Fixed => {
            let keys = analysis.select(config.k, config.min_separation)?;
            evaluation::evaluate_video(&keys, &analysis.frames, &gts, config.match_delta)?
        }
    };
    report.config_digest = config.digest();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetEval {
    pub schema_version: u32,
    pub config_digest: String,
    pub k_mode: KMode,
    pub videos: Vec<EvalReport>,
    pub mean_f: f64,
}

fn evaluate_dataset(manifests: &[VideoManifest], config: &PipelineConfig) -> Result<DatasetEval> {
    config.validate()?;
    let videos = manifests
        .par_iter()
        .map(|m| evaluate_manifest(m, config))
        .collect::<Result<Vec<_>>>()?;
    let mean_f = videos.iter().map(|r| r.mean_f).sum::<f64>() / videos.len() as f64;
    Ok(DatasetEval {
        schema_version: crate::SCHEMA_VERSION,
        config_digest: config.digest(),
        k_mode: config.k_mode,
        videos,
        mean_f,
    })
}

/// One row per video (`video_id, f_u1..f_uN, mean_f`) followed by a `mean` row.
pub fn eval_csv_rows(eval: &DatasetEval) -> (Vec<String>, Vec<Vec<String>>) {
    let users = eval.videos.iter().map(|r| r.per_user.len()).max().unwrap_or(0);
    let mut header = vec!["video_id".to_string()];
    header.extend((1..=users).map(|u| format!("f_u{u}")));
    header.push("mean_f".into());

    let mut rows: Vec<Vec<String>> = eval
        .videos
        .iter()
        .map(|r| {
            let mut row = vec![r.video_id.clone()];
            row.extend((0..users).map(|u| opt(r.per_user.get(u).map(|s| s.f_measure))));
            row.push(r.mean_f.to_string());
            row
        })
        .collect();

    let mut mean_row = vec!["mean".to_string()];
    mean_row.extend((0..users).map(|u| {
        let fs: Vec<f64> = eval
            .videos
            .iter()
            .filter_map(|r| r.per_user.get(u).map(|s| s.f_measure))
            .collect();
        opt((!fs.is_empty()).then(|| fs.iter().sum::<f64>() / fs.len() as f64))
    }));
    mean_row.push(eval.mean_f.to_string());
    rows.push(mean_row);
    (header, rows)
}

/// Evaluate every video of the (single or dataset) manifest. When an output
/// path is set, writes `eval/<video_id>.json`, `eval.json` and `eval.csv`.
pub fn run_eval(config: &PipelineConfig) -> Result<DatasetEval> {
    let manifests =
        ingest::load_dataset_manifest(require_path(&config.manifest_path, "manifest_path")?)?;
    let eval = evaluate_dataset(&manifests, config)?;
    if let Some(out) = config.output_path.as_deref() {
        let per_video = out.join("eval");
        create_dir(&per_video)?;
        for r in &eval.videos {
            write_json(&per_video.join(format!("{}.json", r.video_id)), r)?;
        }
        write_json(&out.join("eval.json"), &eval)?;
        let (header, rows) = eval_csv_rows(&eval);
        write_csv(&out.join("eval.csv"), &header, &rows)?;
        write_json(&out.join("config.json"), config)?;
    }
    Ok(eval)
}

/// One variant of a grid: a JSON patch over the baseline config, or `None`
/// for a variant this toolkit does not implement.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub label: String,
    pub delta: Option<Value>,
}

impl GridRow {
    pub fn new(label: impl Into<String>, delta: Value) -> Self {
        Self {
            label: label.into(),
            delta: Some(delta),
        }
    }

    pub fn not_implemented(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            delta: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentGrid {
    pub name: String,
    pub baseline: PipelineConfig,
    pub rows: Vec<GridRow>,
}

/// Names accepted by [`ExperimentGrid::builtin`].
pub const BUILTIN_GRIDS: [&str; 2] = ["fusion-table", "feature-table"];

impl ExperimentGrid {
    pub fn new(name: impl Into<String>, baseline: PipelineConfig, rows: Vec<GridRow>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &rows {
            if !seen.insert(r.label.as_str()) {
                return Err(Error::Config(format!("duplicate grid row label {:?}", r.label)));
            }
        }
        Ok(Self {
            name: name.into(),
            baseline,
            rows,
        })
    }

    pub fn builtin(name: &str, baseline: PipelineConfig) -> Result<Self> {
        match name {
            "fusion-table" => Self::new(name, baseline, fusion_rows()),
            "feature-table" => Self::new(name, baseline, feature_rows()),
            other => Err(Error::Config(format!(
                "unknown grid {other:?}; expected one of {BUILTIN_GRIDS:?}"
            ))),
        }
    }

    /// The baseline with `row`'s patch applied.
    pub fn row_config(&self, row: &GridRow) -> Result<Option<PipelineConfig>> {
        let Some(delta) = &row.delta else {
            return Ok(None);
        };
        let mut value = serde_json::to_value(&self.baseline).expect("config serializes");
        merge(&mut value, delta);
        let config: PipelineConfig = serde_json::from_value(value)
            .map_err(|e| Error::Config(format!("grid row {:?}: {e}", row.label)))?;
        config.validate()?;
        Ok(Some(config))
    }
}

/// Recursive object merge; non-object values in `patch` replace.
fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p.clone(),
    }
}

fn fusion_rows() -> Vec<GridRow> {
    FusionOperator::ALL
        .iter()
        .map(|op| {
            let mut fusion = serde_json::json!({ "operator": op.name() });
            if *op == FusionOperator::Linear {
                fusion["weights"] = serde_json::json!([0.5, 0.5]);
            }
            GridRow::new(op.name(), serde_json::json!({ "fusion": fusion }))
        })
        .collect()
}

fn feature_rows() -> Vec<GridRow> {
    use serde_json::json;
    let both = |bins: usize| {
        json!({ "hue_bins": bins, "features": ["hue", "saliency-flow"], "fusion": { "operator": "variance" } })
    };
    let mut rows = vec![
        GridRow::not_implemented("static (saliency maps)"),
        GridRow::not_implemented("optical flow (video frames)"),
        GridRow::new("optical flow (saliency maps)", json!({ "features": ["saliency-flow"] })),
        GridRow::new("hue8 (video frames)", json!({ "hue_bins": 8, "features": ["hue"] })),
        GridRow::new("hue16 (video frames)", json!({ "hue_bins": 16, "features": ["hue"] })),
        GridRow::not_implemented("lbp (video frames)"),
        GridRow::not_implemented("lbp (saliency maps)"),
    ];
    rows.extend(
        [4, 8, 16, 32, 64].map(|n| GridRow::new(format!("hue{n} + optical flow (saliency maps)"), both(n))),
    );
    rows.extend(
        [8, 16, 32, 64]
            .map(|n| GridRow::not_implemented(format!("hsv{n} + optical flow (saliency maps)"))),
    );
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowStatus {
    Ok,
    Failed,
    NotImplemented,
}

impl RowStatus {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::Failed => "failed",
            Self::NotImplemented => "not-implemented",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    pub label: String,
    pub status: RowStatus,
    pub config_digest: String,
    pub mean_f: Option<f64>,
    pub error: Option<String>,
}

fn run_row(grid: &ExperimentGrid, row: &GridRow, manifests: &[VideoManifest]) -> GridResult {
    let result = |status, digest: String, mean_f, error| GridResult {
        label: row.label.clone(),
        status,
        config_digest: digest,
        mean_f,
        error,
    };
    match grid.row_config(row) {
        Ok(None) => result(RowStatus::NotImplemented, String::new(), None, None),
        Err(e) => result(RowStatus::Failed, String::new(), None, Some(e.to_string())),
        Ok(Some(config)) => match evaluate_dataset(manifests, &config) {
            Ok(eval) => result(RowStatus::Ok, config.digest(), Some(eval.mean_f), None),
            Err(e) => result(RowStatus::Failed, config.digest(), None, Some(e.to_string())),
        },
    }
}

/// Score every row of `grid` over the dataset. Failing rows are recorded and
/// the grid continues. Writes `<grid name>.csv` when the baseline has an
/// output path.
pub fn run_grid(grid: &ExperimentGrid, dataset_manifest: &Path) -> Result<Vec<GridResult>> {
    let manifests = ingest::load_dataset_manifest(dataset_manifest)?;
    let results: Vec<GridResult> = grid
        .rows
        .iter()
        .map(|row| run_row(grid, row, &manifests))
        .collect();
    if let Some(out) = grid.baseline.output_path.as_deref() {
        create_dir(out)?;
        let header = ["label", "status", "mean_f", "config_digest", "error"]
            .map(String::from)
            .to_vec();
        let rows: Vec<Vec<String>> = results
            .iter()
            .map(|r| {
                vec![
                    r.label.clone(),
                    r.status.name().to_string(),
                    opt(r.mean_f),
                    r.config_digest.clone(),
                    r.error.clone().unwrap_or_default(),
                ]
            })
            .collect();
        write_csv(&out.join(format!("{}.csv", grid.name)), &header, &rows)?;
    }
    Ok(results)
}
