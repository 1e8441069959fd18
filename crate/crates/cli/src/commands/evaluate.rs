//! `conformal-box evaluate`: coverage before/after conformalization, stretch,
//! and average precision, written as one JSON report plus PR-curve files.

use serde::Serialize;

use conformal_box_core::{
    coverage, match_dataset, pooled_pairs, precision_recall, stats, CoverageReport, Error,
    MarginSet, MatchStats, PrCurve, Result, ScoreMode,
};

use crate::args::{EvaluateArgs, SubsetArg};
use crate::commands::{dump_match_reports, load_selected, write_json_file, write_text_file};

/// Coverage for one score mode, on raw and frame-clamped conformal boxes.
/// The two agree whenever ground truths lie inside their frames (they are
/// clamped at load), but both are reported.
#[derive(Serialize)]
struct ModeEvaluation {
    margins: MarginSet,
    unclamped: CoverageReport,
    clamped: CoverageReport,
}

#[derive(Serialize)]
struct CoverageSection {
    raw: CoverageReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    additive: Option<ModeEvaluation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    multiplicative: Option<ModeEvaluation>,
}

#[derive(Serialize)]
struct ApEntry {
    iou_threshold: f64,
    average_precision: f64,
}

#[derive(Serialize)]
struct EvaluationReport {
    iou_threshold: f64,
    n_images: usize,
    n_ground_truth_boxes: usize,
    n_detections: usize,
    pairing: MatchStats,
    coverage: CoverageSection,
    average_precision: Vec<ApEntry>,
}

pub fn run(args: &EvaluateArgs) -> Result<()> {
    let dataset = load_selected(&args.data, &args.split, SubsetArg::Test, args.seed)?;
    let reports = match_dataset(&dataset, args.iou_threshold);
    if let Some(path) = &args.dump_matches {
        dump_match_reports(path, &reports)?;
    }
    let pairs = pooled_pairs(&reports);
    let frames = dataset.frames();

    let mut section = CoverageSection {
        raw: coverage(&pairs, None, None)?,
        additive: None,
        multiplicative: None,
    };
    for path in &args.margins {
        let margins = MarginSet::load(path)?;
        if margins.iou_threshold != args.iou_threshold {
            log::warn!(
                "margins {} were calibrated at IoU threshold {} but evaluation pairs at {}",
                path.display(),
                margins.iou_threshold,
                args.iou_threshold
            );
        }
        let evaluation = ModeEvaluation {
            unclamped: coverage(&pairs, Some(&margins), None)?,
            clamped: coverage(&pairs, Some(&margins), Some(&frames))?,
            margins,
        };
        let slot = match evaluation.margins.mode {
            ScoreMode::Additive => &mut section.additive,
            ScoreMode::Multiplicative => &mut section.multiplicative,
        };
        if slot.is_some() {
            return Err(Error::InvalidArgument(format!(
                "two margins files with mode {}",
                evaluation.margins.mode
            )));
        }
        *slot = Some(evaluation);
    }

    let mut curves: Vec<PrCurve> = Vec::new();
    let mut ap_entries = Vec::new();
    for &threshold in &args.ap_iou {
        let curve = precision_recall(&dataset, threshold)?;
        ap_entries.push(ApEntry {
            iou_threshold: threshold,
            average_precision: curve.average_precision(),
        });
        curves.push(curve);
    }

    let report = EvaluationReport {
        iou_threshold: args.iou_threshold,
        n_images: dataset.n_images(),
        n_ground_truth_boxes: dataset.n_ground_truth_boxes(),
        n_detections: dataset.n_detections(),
        pairing: stats(&reports),
        coverage: section,
        average_precision: ap_entries,
    };
    write_json_file(&args.out, &report)?;
    log::info!(
        "raw coverage {:.4} over {} pairs -> {}",
        report.coverage.raw.empirical_coverage,
        report.coverage.raw.n_pairs,
        args.out.display()
    );

    for curve in &curves {
        let stem = curve_path(&args.out, curve.iou_threshold, "json");
        write_json_file(&stem, curve)?;
        if args.pr_csv {
            write_text_file(
                &curve_path(&args.out, curve.iou_threshold, "csv"),
                &curve.to_csv(),
            )?;
        }
    }
    Ok(())
}

/// `report.json` + threshold 0.3 -> `report.pr-0.3.json`.
fn curve_path(out: &std::path::Path, iou: f64, ext: &str) -> std::path::PathBuf {
    out.with_extension(format!("pr-{iou}.{ext}"))
}
