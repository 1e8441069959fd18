//! Association of predicted boxes with ground-truth boxes.
//!
//! For each ground-truth box, taken in input order, the not-yet-assigned
//! predictions are scanned in decreasing confidence order and the first one
//! with IoU at or above the threshold is paired to it. Whatever remains
//! unpaired is a false positive (prediction side) or a false negative
//! (ground-truth side). Ties in confidence fall back to input order so the
//! outcome is reproducible.
//!
//! This is the pairing used to build the calibration set; it is deliberately
//! not the best-IoU assignment used by AP evaluation (see [`crate::metrics`]).

use serde::{Deserialize, Serialize};

use crate::dataset::{Detection, DetectionDataset};
use crate::geometry::BBox;

/// A ground-truth box paired with one predicted box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub image_id: u64,
    pub truth: BBox,
    pub prediction: BBox,
    pub confidence: f64,
    /// IoU between `truth` and `prediction`; at least the matching threshold.
    pub iou: f64,
}

/// Matching outcome for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub image_id: u64,
    pub iou_threshold: f64,
    pub pairs: Vec<MatchedPair>,
    pub false_positives: Vec<Detection>,
    pub false_negatives: Vec<BBox>,
}

/// Aggregate counts over a set of match reports.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchStats {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// Matches one image's predictions to its ground truths.
///
/// `iou_threshold` is expected in `(0, 1)`. Empty inputs produce an empty
/// report rather than an error.
pub fn match_image(
    image_id: u64,
    truths: &[BBox],
    detections: &[Detection],
    iou_threshold: f64,
) -> MatchReport {
    // Stable sort: equal confidences keep their input order.
    let mut scan_order: Vec<usize> = (0..detections.len()).collect();
    scan_order.sort_by(|&a, &b| detections[b].score.total_cmp(&detections[a].score));

    let mut assigned = vec![false; detections.len()];
    let mut truth_matched = vec![false; truths.len()];
    let mut pairs = Vec::new();

    for (truth_idx, truth) in truths.iter().enumerate() {
        for &det_idx in &scan_order {
            if assigned[det_idx] {
                continue;
            }
            let detection = &detections[det_idx];
            let iou = truth.iou(&detection.bbox);
            if iou >= iou_threshold {
                assigned[det_idx] = true;
                truth_matched[truth_idx] = true;
                pairs.push(MatchedPair {
                    image_id,
                    truth: *truth,
                    prediction: detection.bbox,
                    confidence: detection.score,
                    iou,
                });
                break;
            }
        }
    }

    let false_positives = detections
        .iter()
        .enumerate()
        .filter(|(i, _)| !assigned[*i])
        .map(|(_, d)| *d)
        .collect();
    let false_negatives = truths
        .iter()
        .enumerate()
        .filter(|(i, _)| !truth_matched[*i])
        .map(|(_, t)| *t)
        .collect();

    MatchReport {
        image_id,
        iou_threshold,
        pairs,
        false_positives,
        false_negatives,
    }
}

/// Matches every image of a dataset, reports in dataset (image-id) order.
pub fn match_dataset(dataset: &DetectionDataset, iou_threshold: f64) -> Vec<MatchReport> {
    dataset
        .records
        .iter()
        .map(|record| {
            match_image(
                record.ground_truth.image_id,
                &record.ground_truth.boxes,
                &record.predictions.detections,
                iou_threshold,
            )
        })
        .collect()
}

/// Pools all matched pairs across images, disregarding their source image.
pub fn pooled_pairs(reports: &[MatchReport]) -> Vec<MatchedPair> {
    reports
        .iter()
        .flat_map(|r| r.pairs.iter().copied())
        .collect()
}

/// Sums TP/FP/FN counts over reports.
pub fn stats(reports: &[MatchReport]) -> MatchStats {
    reports
        .iter()
        .fold(MatchStats::default(), |acc, r| MatchStats {
            true_positives: acc.true_positives + r.pairs.len(),
            false_positives: acc.false_positives + r.false_positives.len(),
            false_negatives: acc.false_negatives + r.false_negatives.len(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    fn det(bbox: BBox, score: f64) -> Detection {
        Detection { bbox, score }
    }

    #[test]
    fn exact_match_pairs_with_full_iou() {
        let truths = [bx(0.0, 0.0, 10.0, 10.0)];
        let dets = [det(bx(0.0, 0.0, 10.0, 10.0), 0.9)];
        let report = match_image(1, &truths, &dets, 0.5);
        assert_eq!(report.pairs.len(), 1);
        assert_eq!(report.pairs[0].iou, 1.0);
        assert_eq!(report.pairs[0].confidence, 0.9);
        assert!(report.false_positives.is_empty());
        assert!(report.false_negatives.is_empty());
    }

    #[test]
    fn higher_confidence_wins_over_higher_iou() {
        // The 0.95-confidence box is scanned first and its IoU (0.64) clears
        // the threshold, so the better-overlapping 0.6-confidence box loses.
        let truths = [bx(0.0, 0.0, 10.0, 10.0)];
        let dets = [
            det(bx(0.0, 0.0, 10.0, 10.0), 0.6),
            det(bx(1.0, 1.0, 9.0, 9.0), 0.95),
        ];
        let report = match_image(1, &truths, &dets, 0.5);
        assert_eq!(report.pairs.len(), 1);
        assert_eq!(report.pairs[0].prediction, bx(1.0, 1.0, 9.0, 9.0));
        assert_eq!(report.pairs[0].iou, 0.64);
        assert_eq!(report.false_positives.len(), 1);
    }

    #[test]
    fn first_truth_consumes_shared_prediction() {
        let truths = [bx(0.0, 0.0, 10.0, 10.0), bx(2.0, 2.0, 12.0, 12.0)];
        let dets = [det(bx(1.0, 1.0, 11.0, 11.0), 0.8)];
        let report = match_image(1, &truths, &dets, 0.5);
        assert_eq!(report.pairs.len(), 1);
        assert_eq!(report.pairs[0].truth, truths[0]);
        assert_eq!(report.false_negatives, vec![truths[1]]);
        assert!(report.false_positives.is_empty());
    }

    #[test]
    fn empty_inputs_give_empty_report() {
        let report = match_image(1, &[], &[], 0.5);
        assert!(report.pairs.is_empty());
        assert!(report.false_positives.is_empty());
        assert!(report.false_negatives.is_empty());
    }

    #[test]
    fn equal_confidence_falls_back_to_input_order() {
        let truths = [bx(0.0, 0.0, 10.0, 10.0)];
        let dets = [
            det(bx(0.0, 0.0, 9.0, 10.0), 0.7),
            det(bx(0.0, 0.0, 10.0, 10.0), 0.7),
        ];
        let report = match_image(1, &truths, &dets, 0.5);
        assert_eq!(report.pairs[0].prediction, dets[0].bbox);
    }

    #[test]
    fn below_threshold_means_no_pair() {
        let truths = [bx(0.0, 0.0, 10.0, 10.0)];
        let dets = [det(bx(8.0, 8.0, 18.0, 18.0), 0.9)];
        let report = match_image(1, &truths, &dets, 0.5);
        assert!(report.pairs.is_empty());
        assert_eq!(report.false_positives.len(), 1);
        assert_eq!(report.false_negatives.len(), 1);
    }

    /// Known corner of the greedy mechanism: with overlapping truths, a
    /// higher threshold can yield MORE pairs. At 0.5 the first truth grabs
    /// the straddling high-confidence prediction (IoU exactly 0.5) and the
    /// second truth starves (its best IoU is 1/3); at 0.8 the first truth
    /// falls through to its own exact prediction and both truths match.
    /// Threshold monotonicity therefore holds only when no prediction clears
    /// the threshold for two truths at once, which separated (real-scene)
    /// truths guarantee.
    #[test]
    fn overlapping_truths_can_break_threshold_monotonicity() {
        let truths = [bx(0.0, 0.0, 10.0, 10.0), bx(0.0, 5.0, 10.0, 15.0)];
        let dets = [
            // covers the second truth fully and half of the first
            det(bx(0.0, 2.5, 10.0, 15.0), 0.9),
            // the first truth's own, lower-confidence, exact prediction
            det(bx(0.0, 0.0, 10.0, 10.0), 0.5),
        ];
        assert_eq!(truths[0].iou(&dets[0].bbox), 0.5);
        assert_eq!(truths[1].iou(&dets[0].bbox), 0.8);
        assert_eq!(truths[1].iou(&dets[1].bbox), 1.0 / 3.0);

        let low = match_image(1, &truths, &dets, 0.5);
        let high = match_image(1, &truths, &dets, 0.8);
        assert_eq!(low.pairs.len(), 1); // truth 0 steals the straddling box
        assert_eq!(low.pairs[0].truth, truths[0]);
        assert_eq!(high.pairs.len(), 2);
    }

    #[test]
    fn stats_sum_over_reports() {
        let truths = [bx(0.0, 0.0, 10.0, 10.0)];
        let dets = [
            det(bx(0.0, 0.0, 10.0, 10.0), 0.9),
            det(bx(50.0, 50.0, 60.0, 60.0), 0.4),
        ];
        let a = match_image(1, &truths, &dets, 0.5);
        let b = match_image(2, &truths, &[], 0.5);
        let s = stats(&[a, b]);
        assert_eq!(
            s,
            MatchStats {
                true_positives: 1,
                false_positives: 1,
                false_negatives: 1
            }
        );
    }
}
