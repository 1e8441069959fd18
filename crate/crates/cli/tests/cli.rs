//! Behavioral tests of the `conformal-box` binary: exit codes, error
//! messages, and file outputs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use conformal_box_core::{generate, GeneratorConfig, MarginSet, ScoreMode, ScoreVector};

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_conformal-box"))
}

fn run(args: &[&str]) -> Output {
    binary().args(args).output().expect("binary runs")
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
    gt: PathBuf,
    pred: PathBuf,
}

impl Workspace {
    fn synthetic(n_images: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let ds = generate(&GeneratorConfig {
            n_images,
            ..GeneratorConfig::default()
        })
        .unwrap();
        let gt = root.join("gt.json");
        let pred = root.join("pred.json");
        ds.save_ground_truth(&gt).unwrap();
        ds.save_predictions(&pred).unwrap();
        Workspace {
            _dir: dir,
            root,
            gt,
            pred,
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn arg<'a>(&self, path: &'a Path) -> &'a str {
        path.to_str().unwrap()
    }
}

#[test]
fn calibrate_writes_margins_with_defaults() {
    let ws = Workspace::synthetic(60);
    let out = ws.path("margins.json");
    let output = run(&[
        "calibrate",
        "--gt",
        ws.arg(&ws.gt),
        "--pred",
        ws.arg(&ws.pred),
        "--out",
        ws.arg(&out),
    ]);
    assert!(output.status.success(), "{}", stderr_of(&output));
    let margins = MarginSet::load(&out).unwrap();
    assert_eq!(margins.alpha, 0.1);
    assert_eq!(margins.mode, ScoreMode::Additive);
    assert_eq!(margins.iou_threshold, 0.5);
    assert!(!margins.unbounded);
    assert!(margins.n_box > 0);
}

#[test]
fn calibrate_mode_both_writes_two_files() {
    let ws = Workspace::synthetic(60);
    let out = ws.path("margins.json");
    let output = run(&[
        "calibrate",
        "--gt",
        ws.arg(&ws.gt),
        "--pred",
        ws.arg(&ws.pred),
        "--out",
        ws.arg(&out),
        "--mode",
        "both",
    ]);
    assert!(output.status.success(), "{}", stderr_of(&output));
    let additive = MarginSet::load(&ws.path("margins.additive.json")).unwrap();
    let multiplicative = MarginSet::load(&ws.path("margins.multiplicative.json")).unwrap();
    assert_eq!(additive.mode, ScoreMode::Additive);
    assert_eq!(multiplicative.mode, ScoreMode::Multiplicative);
    assert!(
        !out.exists(),
        "unsuffixed file should not be written for --mode both"
    );
}

#[test]
fn empty_calibration_data_exits_3_with_remedial_message() {
    let ws = Workspace::synthetic(5);
    std::fs::write(
        ws.path("empty_gt.json"),
        r#"{"images": [{"id": 1, "width": 64, "height": 64, "file_name": ""}], "annotations": []}"#,
    )
    .unwrap();
    std::fs::write(ws.path("empty_pred.json"), "[]").unwrap();
    let out = ws.path("margins.json");
    let output = run(&[
        "calibrate",
        "--gt",
        ws.arg(&ws.path("empty_gt.json")),
        "--pred",
        ws.arg(&ws.path("empty_pred.json")),
        "--out",
        ws.arg(&out),
    ]);
    assert_eq!(output.status.code(), Some(3));
    assert!(stderr_of(&output).contains("insufficient calibration data"));
    assert!(!out.exists());
}

#[test]
fn missing_input_file_exits_4() {
    let ws = Workspace::synthetic(5);
    let output = run(&[
        "calibrate",
        "--gt",
        "/nonexistent/gt.json",
        "--pred",
        ws.arg(&ws.pred),
        "--out",
        ws.arg(&ws.path("margins.json")),
    ]);
    assert_eq!(output.status.code(), Some(4));
}

#[test]
fn invalid_alpha_exits_2() {
    let ws = Workspace::synthetic(5);
    let output = run(&[
        "calibrate",
        "--gt",
        ws.arg(&ws.gt),
        "--pred",
        ws.arg(&ws.pred),
        "--out",
        ws.arg(&ws.path("margins.json")),
        "--alpha",
        "1.5",
    ]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn malformed_json_exits_2_and_names_the_position() {
    let ws = Workspace::synthetic(5);
    std::fs::write(ws.path("broken.json"), "{\n  \"images\": [,]\n}").unwrap();
    let output = run(&[
        "calibrate",
        "--gt",
        ws.arg(&ws.path("broken.json")),
        "--pred",
        ws.arg(&ws.pred),
        "--out",
        ws.arg(&ws.path("margins.json")),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr_of(&output).contains("line 2"));
}

#[test]
fn conformalize_with_zero_margins_is_identity() {
    let ws = Workspace::synthetic(20);
    let margins_path = ws.path("zero.json");
    MarginSet::bounded(0.1, ScoreMode::Additive, 10, 0.5, ScoreVector::ZERO)
        .save(&margins_path)
        .unwrap();
    let out = ws.path("conformalized.json");
    let output = run(&[
        "conformalize",
        "--gt",
        ws.arg(&ws.gt),
        "--pred",
        ws.arg(&ws.pred),
        "--margins",
        ws.arg(&margins_path),
        "--out",
        ws.arg(&out),
    ]);
    assert!(output.status.success(), "{}", stderr_of(&output));
    let original: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&ws.pred).unwrap()).unwrap();
    let conformalized: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(original, conformalized);
}

#[test]
fn conformalize_rejects_mode_mismatch() {
    let ws = Workspace::synthetic(20);
    let margins_path = ws.path("add.json");
    MarginSet::bounded(0.1, ScoreMode::Additive, 10, 0.5, ScoreVector::ZERO)
        .save(&margins_path)
        .unwrap();
    let output = run(&[
        "conformalize",
        "--gt",
        ws.arg(&ws.gt),
        "--pred",
        ws.arg(&ws.pred),
        "--margins",
        ws.arg(&margins_path),
        "--out",
        ws.arg(&ws.path("out.json")),
        "--mode",
        "multiplicative",
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr_of(&output).contains("additive"));
}

#[test]
fn conformalize_with_unbounded_margins_exits_3() {
    let ws = Workspace::synthetic(20);
    let margins_path = ws.path("unbounded.json");
    MarginSet::new_unbounded(0.1, ScoreMode::Additive, 2, 0.5)
        .save(&margins_path)
        .unwrap();
    let output = run(&[
        "conformalize",
        "--gt",
        ws.arg(&ws.gt),
        "--pred",
        ws.arg(&ws.pred),
        "--margins",
        ws.arg(&margins_path),
        "--out",
        ws.arg(&ws.path("out.json")),
    ]);
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn conformalize_clamp_keeps_boxes_inside_the_frame() {
    let ws = Workspace::synthetic(20);
    let margins_path = ws.path("wide.json");
    MarginSet::bounded(
        0.1,
        ScoreMode::Additive,
        10,
        0.5,
        ScoreVector::from_array([500.0; 4]),
    )
    .save(&margins_path)
    .unwrap();
    let out = ws.path("clamped.json");
    let output = run(&[
        "conformalize",
        "--gt",
        ws.arg(&ws.gt),
        "--pred",
        ws.arg(&ws.pred),
        "--margins",
        ws.arg(&margins_path),
        "--out",
        ws.arg(&out),
        "--clamp",
    ]);
    assert!(output.status.success(), "{}", stderr_of(&output));
    let entries: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    for entry in entries.as_array().unwrap() {
        let bbox = entry["bbox"].as_array().unwrap();
        let (x, y, w, h) = (
            bbox[0].as_f64().unwrap(),
            bbox[1].as_f64().unwrap(),
            bbox[2].as_f64().unwrap(),
            bbox[3].as_f64().unwrap(),
        );
        assert!(x >= 0.0 && y >= 0.0);
        assert!(x + w <= 1280.0 && y + h <= 720.0);
    }
}

#[test]
fn evaluate_reports_all_three_coverage_conditions() {
    let ws = Workspace::synthetic(80);
    let output = run(&[
        "calibrate",
        "--gt",
        ws.arg(&ws.gt),
        "--pred",
        ws.arg(&ws.pred),
        "--out",
        ws.arg(&ws.path("margins.json")),
        "--mode",
        "both",
        "--split",
        "0,40,40",
        "--subset",
        "calibration",
    ]);
    assert!(output.status.success(), "{}", stderr_of(&output));

    let report_path = ws.path("report.json");
    let output = run(&[
        "evaluate",
        "--gt",
        ws.arg(&ws.gt),
        "--pred",
        ws.arg(&ws.pred),
        "--out",
        ws.arg(&report_path),
        "--margins",
        ws.arg(&ws.path("margins.additive.json")),
        "--margins",
        ws.arg(&ws.path("margins.multiplicative.json")),
        "--split",
        "0,40,40",
        "--subset",
        "test",
        "--pr-csv",
    ]);
    assert!(output.status.success(), "{}", stderr_of(&output));

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    let coverage = &report["coverage"];
    assert!(coverage["raw"]["empirical_coverage"].is_number());
    for mode in ["additive", "multiplicative"] {
        assert!(coverage[mode]["unclamped"]["empirical_coverage"].is_number());
        assert!(coverage[mode]["clamped"]["empirical_coverage"].is_number());
        // in-frame truths: clamped and unclamped coverage agree
        assert_eq!(
            coverage[mode]["unclamped"]["n_covered"],
            coverage[mode]["clamped"]["n_covered"]
        );
        let conformal = coverage[mode]["unclamped"]["empirical_coverage"]
            .as_f64()
            .unwrap();
        let raw = coverage["raw"]["empirical_coverage"].as_f64().unwrap();
        assert!(conformal > raw);
    }
    let ap = report["average_precision"].as_array().unwrap();
    assert_eq!(ap.len(), 2);
    assert_eq!(ap[0]["iou_threshold"].as_f64().unwrap(), 0.3);
    assert_eq!(ap[1]["iou_threshold"].as_f64().unwrap(), 0.8);
    assert!(
        ap[0]["average_precision"].as_f64().unwrap()
            >= ap[1]["average_precision"].as_f64().unwrap()
    );

    // No CLI-layer drift: the report numbers equal the library's coverage
    // on the same subset (same default seed 42 for the split shuffle).
    let ds = conformal_box_core::load_dataset(
        &ws.gt,
        &ws.pred,
        &conformal_box_core::LoadOptions::default(),
    )
    .unwrap();
    let (_, _, test) = conformal_box_core::split(
        &ds,
        conformal_box_core::SplitSizes {
            n_validation: 0,
            n_calibration: 40,
            n_test: 40,
        },
        42,
    )
    .unwrap();
    let pairs = conformal_box_core::pooled_pairs(&conformal_box_core::match_dataset(&test, 0.5));
    let margins = MarginSet::load(&ws.path("margins.additive.json")).unwrap();
    let lib_raw = conformal_box_core::coverage(&pairs, None, None).unwrap();
    let lib_conformal = conformal_box_core::coverage(&pairs, Some(&margins), None).unwrap();
    assert_eq!(
        coverage["raw"]["empirical_coverage"].as_f64().unwrap(),
        lib_raw.empirical_coverage
    );
    assert_eq!(
        coverage["additive"]["unclamped"]["empirical_coverage"]
            .as_f64()
            .unwrap(),
        lib_conformal.empirical_coverage
    );
    assert_eq!(
        coverage["additive"]["unclamped"]["stretch"]
            .as_f64()
            .unwrap(),
        lib_conformal.stretch
    );

    for name in [
        "report.pr-0.3.json",
        "report.pr-0.8.json",
        "report.pr-0.3.csv",
        "report.pr-0.8.csv",
    ] {
        assert!(ws.path(name).exists(), "{name} missing");
    }
}

#[test]
fn evaluate_rejects_duplicate_mode_margins() {
    let ws = Workspace::synthetic(20);
    let margins_path = ws.path("m.json");
    MarginSet::bounded(0.1, ScoreMode::Additive, 10, 0.5, ScoreVector::ZERO)
        .save(&margins_path)
        .unwrap();
    let output = run(&[
        "evaluate",
        "--gt",
        ws.arg(&ws.gt),
        "--pred",
        ws.arg(&ws.pred),
        "--out",
        ws.arg(&ws.path("report.json")),
        "--margins",
        ws.arg(&margins_path),
        "--margins",
        ws.arg(&margins_path),
    ]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn subset_without_split_exits_2() {
    let ws = Workspace::synthetic(10);
    let output = run(&[
        "evaluate",
        "--gt",
        ws.arg(&ws.gt),
        "--pred",
        ws.arg(&ws.pred),
        "--out",
        ws.arg(&ws.path("report.json")),
        "--subset",
        "test",
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr_of(&output).contains("--subset requires --split"));
}

#[test]
fn oversized_split_exits_2_and_reports_available() {
    let ws = Workspace::synthetic(10);
    let output = run(&[
        "evaluate",
        "--gt",
        ws.arg(&ws.gt),
        "--pred",
        ws.arg(&ws.pred),
        "--out",
        ws.arg(&ws.path("report.json")),
        "--split",
        "5,5,5",
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr_of(&output).contains("available"));
}

#[test]
fn validate_coverage_writes_report_with_config_file() {
    let ws = Workspace::synthetic(1);
    let gen_config = ws.path("gen.json");
    std::fs::write(
        &gen_config,
        r#"{
            "n_images": 40,
            "boxes_per_image": 2.0,
            "frame_width": 640,
            "frame_height": 480,
            "min_box_size": 16.0,
            "max_box_size": 80.0,
            "noise": {
                "edge_noise_scale": 0.1,
                "miss_rate": 0.1,
                "false_positive_rate": 0.5,
                "seed": 9
            }
        }"#,
    )
    .unwrap();
    let out = ws.path("mc.json");
    let output = run(&[
        "validate-coverage",
        "--out",
        ws.arg(&out),
        "--gen-config",
        ws.arg(&gen_config),
        "--alpha",
        "0.2",
        "--repetitions",
        "10",
        "--seed",
        "3",
    ]);
    assert!(output.status.success(), "{}", stderr_of(&output));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["repetitions"].as_u64(), Some(10));
    assert_eq!(report["alpha"].as_f64(), Some(0.2));
    assert_eq!(report["per_rep_coverage"].as_array().unwrap().len(), 10);
    assert!(report["mean_coverage"].as_f64().unwrap() > 0.0);
}

#[test]
fn render_writes_one_svg_per_image_with_blank_fallback() {
    let ws = Workspace::synthetic(8);
    let margins_path = ws.path("m.json");
    MarginSet::bounded(
        0.1,
        ScoreMode::Additive,
        10,
        0.5,
        ScoreVector::from_array([4.0; 4]),
    )
    .save(&margins_path)
    .unwrap();
    let out_dir = ws.path("overlays");
    // --images points at an empty directory: every raster is missing, so
    // every overlay must fall back to a blank frame.
    let images_dir = ws.path("images");
    std::fs::create_dir_all(&images_dir).unwrap();
    let output = run(&[
        "render",
        "--gt",
        ws.arg(&ws.gt),
        "--pred",
        ws.arg(&ws.pred),
        "--margins",
        ws.arg(&margins_path),
        "--out",
        ws.arg(&out_dir),
        "--images",
        ws.arg(&images_dir),
    ]);
    assert!(output.status.success(), "{}", stderr_of(&output));
    let svgs: Vec<_> = std::fs::read_dir(&out_dir).unwrap().collect();
    assert_eq!(svgs.len(), 8);
    let sample = std::fs::read_to_string(out_dir.join("synthetic_000001.svg")).unwrap();
    assert!(sample.contains("fill=\"white\""));
    assert!(sample.contains("stroke=\"green\""));
    assert!(stderr_of(&output).contains("blank frame"));
}

#[test]
fn score_floor_is_applied_at_load_time() {
    let ws = Workspace::synthetic(40);
    let out_all = ws.path("all.json");
    let out_floored = ws.path("floored.json");
    for (floor, out) in [("0.0", &out_all), ("0.9", &out_floored)] {
        let output = run(&[
            "calibrate",
            "--gt",
            ws.arg(&ws.gt),
            "--pred",
            ws.arg(&ws.pred),
            "--out",
            ws.arg(out),
            "--alpha",
            "0.5",
            "--score-floor",
            floor,
        ]);
        assert!(output.status.success(), "{}", stderr_of(&output));
    }
    let all = MarginSet::load(&out_all).unwrap();
    let floored = MarginSet::load(&out_floored).unwrap();
    assert!(floored.n_box < all.n_box);
}

#[test]
fn dump_matches_writes_per_image_reports() {
    let ws = Workspace::synthetic(12);
    let dump = ws.path("matches.json");
    let output = run(&[
        "calibrate",
        "--gt",
        ws.arg(&ws.gt),
        "--pred",
        ws.arg(&ws.pred),
        "--out",
        ws.arg(&ws.path("m.json")),
        "--dump-matches",
        ws.arg(&dump),
    ]);
    assert!(output.status.success(), "{}", stderr_of(&output));
    let reports: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&dump).unwrap()).unwrap();
    let reports = reports.as_array().unwrap();
    assert_eq!(reports.len(), 12);
    assert!(reports[0]["pairs"].is_array());
    assert!(reports[0]["false_positives"].is_array());
    assert!(reports[0]["false_negatives"].is_array());
    assert_eq!(reports[0]["iou_threshold"].as_f64(), Some(0.5));
}
