//! Evaluation of box-wise coverage, stretch, and Average Precision.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::conformal::{conformalize, MarginSet, ScoreMode};
use crate::dataset::DetectionDataset;
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::pairing::MatchedPair;

/// Empirical box-wise coverage and stretch over a set of matched pairs.
///
/// `mode` and `alpha` are `None` for raw (unconformalized) predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub empirical_coverage: f64,
    pub n_pairs: usize,
    pub n_covered: usize,
    /// Mean ratio of conformalized to predicted box area; 1.0 for raw boxes.
    pub stretch: f64,
    pub mode: Option<ScoreMode>,
    pub alpha: Option<f64>,
}

fn conformal_boxes(
    pairs: &[MatchedPair],
    margins: &MarginSet,
    frames: Option<&BTreeMap<u64, BBox>>,
) -> Result<Vec<BBox>> {
    pairs
        .iter()
        .map(|pair| {
            let frame = frames.and_then(|f| f.get(&pair.image_id));
            conformalize(&pair.prediction, margins, frame)
        })
        .collect()
}

fn mean_area_ratio(pairs: &[MatchedPair], boxes: &[BBox]) -> f64 {
    let mut sum = 0.0;
    let mut counted = 0usize;
    let mut excluded = 0usize;
    for (pair, conformal) in pairs.iter().zip(boxes) {
        let base = pair.prediction.area();
        if base > 0.0 {
            sum += conformal.area() / base;
            counted += 1;
        } else {
            excluded += 1;
        }
    }
    if excluded > 0 {
        log::warn!("excluded {excluded} zero-area predictions from the stretch average");
    }
    if counted == 0 {
        1.0
    } else {
        sum / counted as f64
    }
}

/// Measures how often the (possibly conformalized) prediction entirely
/// contains its ground-truth box.
///
/// With `margins` set, every prediction is conformalized first — and clamped
/// to its image frame when `frames` supplies one. With `margins = None` the
/// raw predictions are tested as-is and stretch is exactly 1.0.
pub fn coverage(
    pairs: &[MatchedPair],
    margins: Option<&MarginSet>,
    frames: Option<&BTreeMap<u64, BBox>>,
) -> Result<CoverageReport> {
    let n_pairs = pairs.len();
    let (n_covered, stretch, mode, alpha) = match margins {
        None => {
            let covered = pairs
                .iter()
                .filter(|p| p.prediction.contains(&p.truth))
                .count();
            (covered, 1.0, None, None)
        }
        Some(margins) => {
            margins.quantiles()?; // fail fast on unbounded margins
            let boxes = conformal_boxes(pairs, margins, frames)?;
            let covered = pairs
                .iter()
                .zip(&boxes)
                .filter(|(pair, conformal)| conformal.contains(&pair.truth))
                .count();
            let stretch = mean_area_ratio(pairs, &boxes);
            (covered, stretch, Some(margins.mode), Some(margins.alpha))
        }
    };
    let empirical_coverage = if n_pairs == 0 {
        0.0
    } else {
        n_covered as f64 / n_pairs as f64
    };
    Ok(CoverageReport {
        empirical_coverage,
        n_pairs,
        n_covered,
        stretch,
        mode,
        alpha,
    })
}

/// Mean ratio of conformalized to predicted box area over the pairs.
/// Zero-area predictions are excluded from the average with a warning.
pub fn stretch(
    pairs: &[MatchedPair],
    margins: &MarginSet,
    frames: Option<&BTreeMap<u64, BBox>>,
) -> Result<f64> {
    margins.quantiles()?;
    let boxes = conformal_boxes(pairs, margins, frames)?;
    Ok(mean_area_ratio(pairs, &boxes))
}

/// One step of the precision/recall sweep, taken at a detection's confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// The precision/recall trade-off at a fixed IoU threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub iou_threshold: f64,
    pub points: Vec<PrPoint>,
}

impl PrCurve {
    /// Area under the precision envelope over recall (all-points
    /// interpolation): precision at each point is replaced by the maximum
    /// precision at any equal-or-higher recall before integrating.
    pub fn average_precision(&self) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        let mut envelope: Vec<f64> = self.points.iter().map(|p| p.precision).collect();
        for i in (0..envelope.len() - 1).rev() {
            envelope[i] = envelope[i].max(envelope[i + 1]);
        }
        let mut area = 0.0;
        let mut prev_recall = 0.0;
        for (point, precision) in self.points.iter().zip(&envelope) {
            area += (point.recall - prev_recall) * precision;
            prev_recall = point.recall;
        }
        area
    }

    /// CSV rendition (`threshold,precision,recall`) for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,precision,recall\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.threshold, p.precision, p.recall));
        }
        out
    }
}

/// Sweeps all detections in decreasing confidence order, greedily matching
/// each to the best-IoU unmatched truth in its image (IoU >= threshold), and
/// records the precision/recall after every detection.
///
/// Note this matching rule is the standard evaluation convention and is
/// intentionally different from the calibration pairing in
/// [`crate::pairing`].
pub fn precision_recall(dataset: &DetectionDataset, iou_threshold: f64) -> Result<PrCurve> {
    let n_truths = dataset.n_ground_truth_boxes();
    if n_truths == 0 {
        return Err(Error::NoGroundTruth);
    }

    // (score, image index, detection index); stable sort keeps ties in
    // dataset order so the sweep is deterministic.
    let mut detections: Vec<(f64, usize, usize)> = Vec::with_capacity(dataset.n_detections());
    for (img_idx, record) in dataset.records.iter().enumerate() {
        for (det_idx, det) in record.predictions.detections.iter().enumerate() {
            detections.push((det.score, img_idx, det_idx));
        }
    }
    detections.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut truth_matched: Vec<Vec<bool>> = dataset
        .records
        .iter()
        .map(|r| vec![false; r.ground_truth.boxes.len()])
        .collect();

    let mut points = Vec::with_capacity(detections.len());
    let mut tp = 0usize;
    for (rank, &(score, img_idx, det_idx)) in detections.iter().enumerate() {
        let record = &dataset.records[img_idx];
        let bbox = record.predictions.detections[det_idx].bbox;
        let mut best: Option<(usize, f64)> = None;
        for (truth_idx, truth) in record.ground_truth.boxes.iter().enumerate() {
            if truth_matched[img_idx][truth_idx] {
                continue;
            }
            let iou = bbox.iou(truth);
            if iou >= iou_threshold && best.is_none_or(|(_, b)| iou > b) {
                best = Some((truth_idx, iou));
            }
        }
        if let Some((truth_idx, _)) = best {
            truth_matched[img_idx][truth_idx] = true;
            tp += 1;
        }
        points.push(PrPoint {
            threshold: score,
            precision: tp as f64 / (rank + 1) as f64,
            recall: tp as f64 / n_truths as f64,
        });
    }

    Ok(PrCurve {
        iou_threshold,
        points,
    })
}

/// Average Precision at a fixed IoU threshold.
pub fn average_precision(dataset: &DetectionDataset, iou_threshold: f64) -> Result<f64> {
    Ok(precision_recall(dataset, iou_threshold)?.average_precision())
}
