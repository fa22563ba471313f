//! `vsum`: keyframe summarization, evaluation and experiment grids.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use vsum_core::evaluation::KMode;
use vsum_core::experiments::{self, ExperimentGrid};
use vsum_core::flow::TemporalNorm;
use vsum_core::fusion::FusionOperator;
use vsum_core::pipeline::{Feature, PipelineConfig};
use vsum_core::saliency::{SaliencyProviderSpec, DEFAULT_SIGMA};
use vsum_core::synthetic;

#[derive(Parser)]
#[command(name = "vsum", version, about = "Keyframe video summarization from color and saliency motion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select keyframes for one video and write traces and images.
    Summarize(ConfigArgs),
    /// Score summaries against ground truth for a video or dataset manifest.
    Eval(ConfigArgs),
    /// Run a built-in comparison grid over a dataset manifest.
    Grid {
        /// fusion-table or feature-table
        #[arg(long)]
        grid: String,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Write a synthetic video (or dataset) with known scene changes.
    GenSynthetic(GenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderKind {
    Precomputed,
    SpectralResidual,
}

#[derive(Clone, Copy, ValueEnum)]
enum SyntheticKind {
    Color,
    Blob,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "color")]
    kind: SyntheticKind,
    /// More than one writes a dataset with `dataset.json`.
    #[arg(long, default_value_t = 1)]
    videos: usize,
    #[arg(long, default_value_t = 5)]
    users: usize,
    #[arg(long, default_value_t = 20)]
    frames_per_scene: usize,
}

/// Flags mirror the config fields. A JSON config file overrides the
/// defaults and flags override the file.
#[derive(Args, Default)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    stride_seconds: Option<f64>,
    #[arg(long)]
    hue_bins: Option<usize>,
    /// Comma-separated: hue, saliency-flow
    #[arg(long, value_delimiter = ',', value_parser = parse_feature)]
    features: Option<Vec<Feature>>,
    #[arg(long, value_enum)]
    provider: Option<ProviderKind>,
    /// Blur sigma of the spectral-residual provider.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    lk_window: Option<usize>,
    #[arg(long)]
    lk_min_eigen: Option<f64>,
    #[arg(long)]
    lk_grid_stride: Option<usize>,
    #[arg(long, value_parser = parse_norm)]
    temporal_norm: Option<TemporalNorm>,
    #[arg(long, value_parser = parse_operator)]
    fusion: Option<FusionOperator>,
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    #[arg(long)]
    smooth_window: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_parser = parse_k_mode)]
    k_mode: Option<KMode>,
    #[arg(long)]
    min_separation: Option<f64>,
    #[arg(long)]
    prominence_min: Option<f64>,
    #[arg(long)]
    match_delta: Option<f64>,
}

/// Parse a kebab-case enum value the same way the config file does.
fn kebab(s: &str) -> serde_json::Value {
    serde_json::Value::String(s.to_string())
}

fn parse_feature(s: &str) -> Result<Feature, String> {
    serde_json::from_value(kebab(s)).map_err(|e| e.to_string())
}

fn parse_norm(s: &str) -> Result<TemporalNorm, String> {
    serde_json::from_value(kebab(s)).map_err(|e| e.to_string())
}

fn parse_k_mode(s: &str) -> Result<KMode, String> {
    serde_json::from_value(kebab(s)).map_err(|e| e.to_string())
}

fn parse_operator(s: &str) -> Result<FusionOperator, String> {
    s.parse()
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
            }
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($field:expr, $flag:expr) => {
                if let Some(v) = $flag.clone() {
                    $field = v;
                }
            };
        }
        if self.manifest.is_some() {
            c.manifest_path = self.manifest.clone();
        }
        if self.output.is_some() {
            c.output_path = self.output.clone();
        }
        set!(c.stride_seconds, self.stride_seconds);
        set!(c.hue_bins, self.hue_bins);
        set!(c.features, self.features);
        set!(c.lk.window, self.lk_window);
        set!(c.lk.min_eigen, self.lk_min_eigen);
        set!(c.lk.grid_stride, self.lk_grid_stride);
        set!(c.temporal_norm, self.temporal_norm);
        set!(c.fusion.operator, self.fusion);
        set!(c.fusion.smooth_window, self.smooth_window);
        set!(c.k, self.k);
        set!(c.k_mode, self.k_mode);
        set!(c.min_separation, self.min_separation);
        set!(c.prominence_min, self.prominence_min);
        set!(c.match_delta, self.match_delta);
        if self.weights.is_some() {
            c.fusion.weights = self.weights.clone();
        }
        match (self.provider, self.sigma) {
            (Some(ProviderKind::Precomputed), Some(_)) => bail!("--sigma applies only to the spectral-residual provider"),
            (Some(ProviderKind::Precomputed), None) => c.provider = SaliencyProviderSpec::Precomputed,
            (Some(ProviderKind::SpectralResidual), sigma) => {
                c.provider = SaliencyProviderSpec::SpectralResidual {
                    sigma: sigma.unwrap_or(DEFAULT_SIGMA),
                }
            }
            (None, Some(s)) => match &mut c.provider {
                SaliencyProviderSpec::SpectralResidual { sigma } => *sigma = s,
                SaliencyProviderSpec::Precomputed => {
                    bail!("--sigma applies only to the spectral-residual provider")
                }
            },
            (None, None) => {}
        }
        c.validate()?;
        Ok(c)
    }
}

fn summarize(args: &ConfigArgs) -> Result<()> {
    let config = args.resolve()?;
    let report = experiments::run_summarize(&config)?;
    println!(
        "{}: {} keyframe(s) [{}] provider={} digest={}{}",
        report.video_id,
        report.keyframes.len(),
        report
            .keyframes
            .iter()
            .map(|k| k.frame_index.to_string())
            .collect::<Vec<_>>()
            .join(", "),
        report.provider,
        report.config_digest,
        if report.short { " (fewer than k candidates)" } else { "" },
    );
    Ok(())
}

fn eval(args: &ConfigArgs) -> Result<()> {
    let config = args.resolve()?;
    let eval = experiments::run_eval(&config)?;
    for v in &eval.videos {
        println!("{}\t{:.4}", v.video_id, v.mean_f);
    }
    println!("mean\t{:.4}", eval.mean_f);
    Ok(())
}

fn grid(name: &str, args: &ConfigArgs) -> Result<()> {
    let config = args.resolve()?;
    let manifest: PathBuf = match &config.manifest_path {
        Some(p) => p.clone(),
        None => bail!("grid needs --manifest (a dataset manifest)"),
    };
    let grid = ExperimentGrid::builtin(name, config)?;
    for r in experiments::run_grid(&grid, &manifest)? {
        let score = r.mean_f.map(|f| format!("{f:.4}")).unwrap_or_else(|| "-".into());
        let detail = r.error.map(|e| format!("  {e}")).unwrap_or_default();
        println!("{:<48} {:<16} {score}{detail}", r.label, r.status.name());
    }
    Ok(())
}

fn gen_synthetic(args: &GenArgs) -> Result<()> {
    let path = match (args.kind, args.videos) {
        (_, 0) => bail!("--videos must be at least 1"),
        (SyntheticKind::Color, 1) => {
            let spec = synthetic::ColorSceneSpec {
                frames_per_scene: args.frames_per_scene,
                ..Default::default()
            };
            synthetic::write_video(&synthetic::color_scene_video(&spec), None, &args.out, args.users)?
        }
        (SyntheticKind::Color, n) => synthetic::write_dataset(&args.out, n, args.users)?,
        (SyntheticKind::Blob, 1) => {
            let (video, maps) = synthetic::moving_blob_video(64, 48, args.frames_per_scene, 3, 1.0);
            synthetic::write_video(&video, Some(&maps), &args.out, args.users)?
        }
        (SyntheticKind::Blob, _) => bail!("blob videos are generated one at a time"),
    };
    println!("{}", path.display());
    Ok(())
}

/// The error chain joined by ": ", skipping causes already spelled out by
/// the message above them.
fn diagnostic(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.ends_with(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Summarize(args) => summarize(args),
        Command::Eval(args) => eval(args),
        Command::Grid { grid: name, config } => grid(name, config),
        Command::GenSynthetic(args) => gen_synthetic(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    experiments::init_thread_pool();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", diagnostic(&e));
            ExitCode::FAILURE
        }
    }
}
