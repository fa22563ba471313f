use std::fs;
use std::path::Path;

use serde_json::json;
use vsum_core::error::{Error, IngestError};
use vsum_core::experiments::{self, ExperimentGrid, GridRow, RowStatus};
use vsum_core::ingest;
use vsum_core::pipeline::PipelineConfig;
use vsum_core::saliency::{SaliencyMap, SaliencyProviderSpec};
use vsum_core::synthetic::{self, ColorSceneSpec};

fn three_scene(root: &Path) -> (synthetic::SyntheticVideo, std::path::PathBuf) {
    let video = synthetic::color_scene_video(&ColorSceneSpec::default());
    let manifest = synthetic::write_video(&video, None, root, 5).unwrap();
    (video, manifest)
}

fn config(manifest: &Path, out: &Path) -> PipelineConfig {
    PipelineConfig {
        manifest_path: Some(manifest.to_path_buf()),
        output_path: Some(out.to_path_buf()),
        ..PipelineConfig::default()
    }
}

#[test]
fn summarize_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let (video, manifest) = three_scene(&dir.path().join("v"));
    let out = dir.path().join("out");
    let report = experiments::run_summarize(&PipelineConfig { k: 3, ..config(&manifest, &out) }).unwrap();

    assert_eq!(report.keyframes.len(), 3);
    for (k, scene) in report.keyframes.iter().zip(&video.scenes) {
        assert!(scene.contains(&(k.frame_index as usize)), "{k:?} outside {scene:?}");
        assert!(out.join(&k.image).is_file());
    }
    assert_eq!(report.provider, "spectral-residual");
    assert!(!report.short);

    let traces = fs::read_to_string(out.join("traces.csv")).unwrap();
    let mut lines = traces.lines();
    assert_eq!(lines.next(), Some("pair_index,frame_a,frame_b,static,temporal,final"));
    assert_eq!(lines.count(), video.frames.len() - 1);

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["config_digest"].as_str().unwrap().len(), 16);
    let saved: PipelineConfig =
        serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(saved.k, 3);
}

#[test]
fn k1_is_a_subset_of_k3() {
    let dir = tempfile::tempdir().unwrap();
    let (_, manifest) = three_scene(&dir.path().join("v"));
    let frames = |k, out: &str| {
        experiments::run_summarize(&PipelineConfig { k, ..config(&manifest, &dir.path().join(out)) })
            .unwrap()
            .keyframes
            .iter()
            .map(|k| k.frame_index)
            .collect::<Vec<_>>()
    };
    let one = frames(1, "k1");
    let three = frames(3, "k3");
    assert_eq!(one.len(), 1);
    assert!(three.contains(&one[0]));
}

#[test]
fn precomputed_provider_needs_every_map() {
    let dir = tempfile::tempdir().unwrap();
    let (_, manifest) = three_scene(&dir.path().join("v"));
    fs::remove_file(dir.path().join("v/saliency/frame_000030.pgm")).unwrap();
    let c = PipelineConfig {
        provider: SaliencyProviderSpec::Precomputed,
        ..config(&manifest, &dir.path().join("out"))
    };
    match experiments::run_summarize(&c) {
        Err(Error::Ingest(IngestError::MissingMap(30))) => {}
        other => panic!("expected MissingMap(30), got {other:?}"),
    }
}

#[test]
fn interchange_maps_round_trip_as_pgm_and_png() {
    let dir = tempfile::tempdir().unwrap();
    let (video, manifest) = three_scene(&dir.path().join("v"));
    let m = ingest::load_manifest(&manifest).unwrap();
    let frames = ingest::load_frames(&m, 1.0).unwrap();
    let sal = ingest::load_saliency(&m, &frames).unwrap();
    assert_eq!(sal.maps.len(), video.frames.len());
    assert_eq!(sal.indices, frames.indices);

    // replace one map with a PNG holding a known ramp
    let ramp = SaliencyMap::from_fn(160, 48, |x, _| x as f32 / 159.0);
    fs::remove_file(dir.path().join("v/saliency/frame_000007.pgm")).unwrap();
    ramp.to_luma8().save(dir.path().join("v/saliency/frame_000007.png")).unwrap();
    let sal = ingest::load_saliency(&m, &frames).unwrap();
    for (a, b) in sal.maps[7].values().iter().zip(ramp.values()) {
        assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
    }
}

#[test]
fn eval_reports_match_the_generated_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let (_, manifest) = three_scene(&dir.path().join("v"));
    let out = dir.path().join("eval");
    let eval = experiments::run_eval(&config(&manifest, &out)).unwrap();
    assert_eq!(eval.videos.len(), 1);
    assert_eq!(eval.videos[0].per_user.len(), 5);
    assert_eq!(eval.mean_f, 1.0);
    assert_eq!(eval.videos[0].config_digest, config(&manifest, &out).digest());
    assert!(out.join("eval/synthetic-3scene.json").is_file());
    let csv = fs::read_to_string(out.join("eval.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("video_id,f_u1,f_u2,f_u3,f_u4,f_u5,mean_f"));
}

#[test]
fn eval_without_ground_truth_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let (_, manifest) = three_scene(&dir.path().join("v"));
    let mut m: serde_json::Value = serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    m["gt_dirs"] = json!([]);
    fs::write(&manifest, m.to_string()).unwrap();
    assert!(matches!(
        experiments::run_eval(&config(&manifest, &dir.path().join("out"))),
        Err(Error::Config(_))
    ));
}

#[test]
fn fifty_video_dataset_gives_fifty_rows_and_a_mean() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = synthetic::write_dataset(&dir.path().join("ds"), 50, 5).unwrap();
    let out = dir.path().join("eval");
    let eval = experiments::run_eval(&config(&dataset, &out)).unwrap();
    assert_eq!(eval.videos.len(), 50);
    let csv = fs::read_to_string(out.join("eval.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 51);
    assert!(rows[50].starts_with("mean,"));
    assert_eq!(rows[0].split(',').next(), Some("syn01"));
    assert_eq!(eval.mean_f, 1.0);
}

#[test]
fn grid_records_a_failing_row_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = synthetic::write_dataset(&dir.path().join("ds"), 2, 3).unwrap();
    let out = dir.path().join("grid");
    let baseline = PipelineConfig {
        output_path: Some(out.clone()),
        ..PipelineConfig::default()
    };
    let mut rows = ExperimentGrid::builtin("fusion-table", baseline.clone()).unwrap().rows;
    // linear without weights cannot be configured
    rows[0] = GridRow::new("linear-unweighted", json!({ "fusion": { "operator": "linear" } }));
    let grid = ExperimentGrid::new("fusion-broken", baseline, rows).unwrap();
    let results = experiments::run_grid(&grid, &dataset).unwrap();

    assert_eq!(results.len(), 8);
    let ok = results.iter().filter(|r| r.status == RowStatus::Ok).count();
    assert_eq!(ok, 7);
    assert_eq!(results[0].status, RowStatus::Failed);
    assert!(results[0].error.is_some());
    for r in results.iter().filter(|r| r.status == RowStatus::Ok) {
        let f = r.mean_f.unwrap();
        assert!((0.0..=1.0).contains(&f));
    }
    let csv = fs::read_to_string(out.join("fusion-broken.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);
    assert!(csv.lines().nth(1).unwrap().starts_with("linear-unweighted,failed,"));
}

#[test]
fn feature_table_marks_unimplemented_rows() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = synthetic::write_dataset(&dir.path().join("ds"), 1, 2).unwrap();
    let grid = ExperimentGrid::builtin("feature-table", PipelineConfig::default()).unwrap();
    let results = experiments::run_grid(&grid, &dataset).unwrap();
    let status = |label: &str| results.iter().find(|r| r.label == label).unwrap().status;
    assert_eq!(status("lbp (video frames)"), RowStatus::NotImplemented);
    assert_eq!(status("hsv8 + optical flow (saliency maps)"), RowStatus::NotImplemented);
    assert_eq!(status("hue8 + optical flow (saliency maps)"), RowStatus::Ok);
    assert!(results.iter().all(|r| r.status != RowStatus::Failed));
}
