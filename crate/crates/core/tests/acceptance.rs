//! Acceptance suite. Each test checks one criterion at its stated tolerance
//! and prints a single `[acceptance] <name>: PASS|FAIL|SKIP` line.
//!
//! Run with `cargo test -p vsum-core --test acceptance -- --nocapture`.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vsum_core::color::{self, HueHistogram, ALLOWED_BINS};
use vsum_core::evaluation::{self, KMode};
use vsum_core::experiments;
use vsum_core::flow::{self, LkParams};
use vsum_core::fusion::{self, FusionOperator, FusionSpec};
use vsum_core::ingest::FrameSequence;
use vsum_core::pipeline::PipelineConfig;
use vsum_core::saliency::{SaliencyMap, SaliencyProviderSpec};
use vsum_core::selection;
use vsum_core::synthetic;
use vsum_core::ScoreSeries;

fn verdict(name: &str, ok: bool, detail: impl AsRef<str>) {
    let status = if ok { "PASS" } else { "FAIL" };
    println!("[acceptance] {name}: {status} ({})", detail.as_ref());
    assert!(ok, "{name} failed: {}", detail.as_ref());
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_histogram(r: &mut ChaCha8Rng, n: usize) -> HueHistogram {
    let mut bins: Vec<f64> = (0..n)
        .map(|_| if r.gen_bool(0.3) { 0.0 } else { r.gen::<f64>() })
        .collect();
    if bins.iter().all(|&b| b == 0.0) {
        bins[r.gen_range(0..n)] = 1.0;
    }
    let sum: f64 = bins.iter().sum();
    HueHistogram::from_bins(bins.iter().map(|b| b / sum).collect()).unwrap()
}

#[test]
fn metric_axioms() {
    let start = Instant::now();
    let mut r = rng(1);
    let pairs = 2000;
    let mut failures = Vec::new();
    for i in 0..pairs {
        let n = ALLOWED_BINS[r.gen_range(0..ALLOWED_BINS.len())];
        let a = random_histogram(&mut r, n);
        // every fourth pair compares equal inputs
        let b = if i % 4 == 0 { a.clone() } else { random_histogram(&mut r, n) };
        let ab = color::histogram_dissimilarity(&a, &b).unwrap();
        let ba = color::histogram_dissimilarity(&b, &a).unwrap();
        let aa = color::histogram_dissimilarity(&a, &a).unwrap();
        let zero_iff_equal = (ab == 0.0) == (a == b);
        if ab != ba || !(0.0..=1.0).contains(&ab) || aa != 0.0 || !zero_iff_equal {
            failures.push(i);
        }
    }
    let elapsed = start.elapsed();
    verdict(
        "metric-axioms",
        failures.is_empty() && elapsed < Duration::from_secs(5),
        format!("{pairs} pairs, {} violations, {:.2?}", failures.len(), elapsed),
    );
}

fn blob(size: usize, cx: f64, cy: f64, sigma: f64) -> SaliencyMap {
    SaliencyMap::from_fn(size, size, |x, y| {
        let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
        (-d2 / (2.0 * sigma * sigma)).exp() as f32
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    }
}

#[test]
fn lk_flow_oracle() {
    let start = Instant::now();
    let params = LkParams {
        window: 21,
        ..LkParams::default()
    };
    let (size, c, sigma) = (96, 48.0, 12.0);
    let base = blob(size, c, c, sigma);
    let mut worst: f64 = 0.0;
    let mut details = Vec::new();
    let mut ok = true;
    for dy in -2i32..=2 {
        for dx in -2i32..=2 {
            let moved = blob(size, c + f64::from(dx), c + f64::from(dy), sigma);
            let field = flow::flow_field(&base, &moved, &params).unwrap();
            if (dx, dy) == (0, 0) {
                let max = field.magnitudes().into_iter().fold(0.0, f64::max);
                ok &= max < 1e-3;
                details.push(format!("(0,0) max |u| {max:.1e}"));
                continue;
            }
            let vectors: Vec<(f64, f64)> = field.valid_vectors().collect();
            let ux = median(vectors.iter().map(|v| v.0).collect());
            let uy = median(vectors.iter().map(|v| v.1).collect());
            let truth = f64::from(dx).hypot(f64::from(dy));
            let rel = (ux - f64::from(dx)).hypot(uy - f64::from(dy)) / truth;
            worst = worst.max(rel);
            ok &= !vectors.is_empty() && rel <= 0.15;
        }
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(30);
    details.push(format!("worst relative error {:.3}", worst));
    details.push(format!("{elapsed:.2?}"));
    verdict("lk-flow-oracle", ok, details.join(", "));
}

fn local_minimum_indices(values: &[f64]) -> Vec<usize> {
    selection::local_minima(values)
        .unwrap()
        .iter()
        .map(|m| m.pair_index)
        .collect()
}

#[test]
fn fusion_checks() {
    let spec = |op| FusionSpec {
        normalize_inputs: false,
        smooth_window: 1,
        ..FusionSpec::with_operator(op)
    };
    let s = |v: &[f64]| ScoreSeries::from_values("s", v.to_vec());

    let hand = fusion::fuse(&[s(&[0.0, 0.5, 1.0]), s(&[1.0, 0.5, 0.0])], &spec(FusionOperator::Variance))
        .unwrap()
        .unsmoothed;
    let hand_ok = hand.iter().all(|v| (v - 6.0).abs() <= 1e-9);

    let mut r = rng(3);
    let (mut order_ok, mut am_hm_ok, mut offset_ok) = (true, true, true);
    for _ in 0..100 {
        let len = r.gen_range(5..60);
        let a: Vec<f64> = (0..len).map(|_| r.gen()).collect();
        let b: Vec<f64> = (0..len).map(|_| r.gen()).collect();
        let pair = [s(&a), s(&b)];
        let fused = |op| fusion::fuse(&pair, &spec(op)).unwrap().unsmoothed;
        let (lo, hi) = (fused(FusionOperator::Min), fused(FusionOperator::Max));
        order_ok &= lo.iter().zip(&hi).all(|(l, h)| l <= h);
        let harmonic = fused(FusionOperator::Harmonic);
        let linear = fusion::fuse(
            &pair,
            &FusionSpec {
                weights: Some(vec![0.5, 0.5]),
                ..spec(FusionOperator::Linear)
            },
        )
        .unwrap()
        .unsmoothed;
        am_hm_ok &= harmonic.iter().zip(&linear).all(|(h, l)| *h <= l + 1e-12);

        let c = r.gen_range(-5.0..5.0);
        let shifted: Vec<f64> = a.iter().map(|x| x + c).collect();
        let base = fused(FusionOperator::Variance);
        let moved = fusion::fuse(&[s(&shifted), s(&b)], &spec(FusionOperator::Variance))
            .unwrap()
            .unsmoothed;
        offset_ok &= local_minimum_indices(&base) == local_minimum_indices(&moved);
    }
    verdict(
        "fusion-checks",
        hand_ok && order_ok && am_hm_ok && offset_ok,
        format!(
            "variance hand example {hand:?}, min<=max {order_ok}, harmonic<=linear {am_hm_ok}, offset invariance {offset_ok} over 100 pairs"
        ),
    );
}

/// Largest matching by exhaustive search.
fn optimal_matching(d: &[Vec<f64>], delta: f64) -> usize {
    fn go(a: usize, d: &[Vec<f64>], delta: f64, used: &mut [bool]) -> usize {
        if a == d.len() {
            return 0;
        }
        let mut best = go(a + 1, d, delta, used);
        for g in 0..used.len() {
            if !used[g] && d[a][g] < delta {
                used[g] = true;
                best = best.max(1 + go(a + 1, d, delta, used));
                used[g] = false;
            }
        }
        best
    }
    let n_gt = d.first().map_or(0, Vec::len);
    go(0, d, delta, &mut vec![false; n_gt])
}

#[test]
fn evaluation_oracle() {
    let mut r = rng(4);
    let mut mismatches = 0;
    for _ in 0..200 {
        let (n_auto, n_gt) = (r.gen_range(1..=6), r.gen_range(1..=6));
        let d: Vec<Vec<f64>> = (0..n_auto)
            .map(|_| (0..n_gt).map(|_| r.gen::<f64>()).collect())
            .collect();
        let mut all: Vec<f64> = d.iter().flatten().copied().collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        assert_eq!(all.len(), n_auto * n_gt, "distances must be distinct");
        if evaluation::match_count_from_distances(&d, 0.5) != optimal_matching(&d, 0.5) {
            mismatches += 1;
        }
    }
    let p = evaluation::precision(3, 5).unwrap();
    let rc = evaluation::recall(3, 6).unwrap();
    let f = evaluation::f_measure(0.6, 0.75);
    let spots = p == 0.6 && rc == 0.5 && f == 2.0 / 3.0;
    verdict(
        "evaluation-oracle",
        mismatches == 0 && spots,
        format!("200 instances, {mismatches} mismatches; precision {p}, recall {rc}, f {f}"),
    );
}

#[test]
fn end_to_end_synthetic() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let video = synthetic::color_scene_video(&synthetic::ColorSceneSpec::default());
    let manifest = synthetic::write_video(&video, None, &dir.path().join("video"), 5).unwrap();
    let out = dir.path().join("run");
    let config = PipelineConfig {
        manifest_path: Some(manifest),
        output_path: Some(out.clone()),
        provider: SaliencyProviderSpec::default(),
        k: 3,
        ..PipelineConfig::default()
    };

    let mut artifacts: Vec<(Vec<u8>, Vec<u8>)> = Vec::new();
    let mut keyframes = Vec::new();
    for _ in 0..3 {
        let report = experiments::run_summarize(&config).unwrap();
        keyframes.push(report.keyframes.iter().map(|k| k.frame_index as usize).collect::<Vec<_>>());
        artifacts.push((
            std::fs::read(out.join("summary.json")).unwrap(),
            std::fs::read(out.join("traces.csv")).unwrap(),
        ));
    }
    let per_scene: Vec<usize> = video
        .scenes
        .iter()
        .map(|s| keyframes[0].iter().filter(|&&f| s.contains(&f)).count())
        .collect();
    let identical = artifacts.windows(2).all(|w| w[0] == w[1]);
    let elapsed = start.elapsed();
    verdict(
        "end-to-end-synthetic",
        per_scene == [1, 1, 1] && identical && elapsed < Duration::from_secs(60),
        format!(
            "keyframes {:?}, per scene {per_scene:?}, byte-identical over 3 runs {identical}, {elapsed:.2?}",
            keyframes[0]
        ),
    );
}

fn sequence(n: usize, fps: f64, step: u64) -> FrameSequence {
    FrameSequence {
        video_id: "random".into(),
        frames: vec![RgbImage::new(1, 1); n],
        indices: (0..n as u64).map(|i| i * step).collect(),
        sample_stride: step as usize,
        fps,
    }
}

#[test]
fn selection_properties() {
    let mut r = rng(6);
    let (mut prefix_ok, mut separation_ok, mut minima_ok) = (true, true, true);
    for _ in 0..100 {
        let len = r.gen_range(10..120);
        let values: Vec<f64> = (0..len).map(|_| r.gen()).collect();
        let frames = sequence(len + 1, [1.0, 25.0, 30.0][r.gen_range(0..3)], r.gen_range(1..40));
        let min_sep = r.gen_range(0.0..4.0);
        let minima = selection::local_minima(&values).unwrap();
        let mut previous: BTreeSet<u64> = BTreeSet::new();
        for k in 1..=12 {
            let set = selection::select_keyframes(&minima, k, min_sep, &frames).unwrap();
            let current: BTreeSet<u64> = set.frame_indices.iter().copied().collect();
            prefix_ok &= previous.is_subset(&current) && set.len() <= k;
            let times: Vec<f64> = set.frame_indices.iter().map(|&i| frames.seconds(i)).collect();
            for (i, a) in times.iter().enumerate() {
                separation_ok &= times[i + 1..].iter().all(|b| (a - b).abs() >= min_sep);
            }
            minima_ok &= set
                .pair_indices
                .iter()
                .all(|&j| selection::is_local_minimum(&values, j));
            previous = current;
        }
    }
    verdict(
        "selection-properties",
        prefix_ok && separation_ok && minima_ok,
        format!("100 series, k=1..12: prefix {prefix_ok}, separation {separation_ok}, minima {minima_ok}"),
    );
}

/// Reference dataset mean f-measure with per-user k and neural saliency maps.
const REFERENCE_MEAN_F: f64 = 0.8354;
const REFERENCE_TOLERANCE: f64 = 0.10;

/// Optional: set `VSUM_VSUMM_MANIFEST` to a dataset manifest whose videos have
/// frames, ground truth and precomputed saliency maps.
#[test]
fn vsumm_reference() {
    let Some(manifest) = std::env::var_os("VSUM_VSUMM_MANIFEST").map(PathBuf::from) else {
        println!("[acceptance] vsumm-reference: SKIP (VSUM_VSUMM_MANIFEST not set)");
        return;
    };
    if !manifest.exists() {
        println!("[acceptance] vsumm-reference: SKIP ({} not found)", manifest.display());
        return;
    }
    let config = PipelineConfig {
        manifest_path: Some(manifest),
        provider: SaliencyProviderSpec::Precomputed,
        k_mode: KMode::PerUser,
        ..PipelineConfig::default()
    };
    let eval = experiments::run_eval(&config).unwrap();
    let gap = (eval.mean_f - REFERENCE_MEAN_F).abs();
    verdict(
        "vsumm-reference",
        gap <= REFERENCE_TOLERANCE,
        format!(
            "{} videos, mean f {:.4}, reference {REFERENCE_MEAN_F} +/- {REFERENCE_TOLERANCE}",
            eval.videos.len(),
            eval.mean_f
        ),
    );
}
