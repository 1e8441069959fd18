//! COCO-style annotation and detection-result parsing, dataset joins, and
//! reproducible validation/calibration/test splits.
//!
//! Input files follow the de-facto COCO conventions: an annotation document
//! with `images` and `annotations` arrays, and a results document that is a
//! flat list of `{image_id, bbox, score}` entries. Boxes are `[x, y, width,
//! height]` floats in both. Loaded datasets can be re-emitted in a canonical
//! form that parses back to the identical in-memory value.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Ground-truth boxes and pixel dimensions for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub image_id: u64,
    pub file_name: String,
    pub image_width: u32,
    pub image_height: u32,
    pub boxes: Vec<BBox>,
}

impl GroundTruthRecord {
    /// The image frame `(0, 0, width, height)`.
    pub fn frame(&self) -> BBox {
        BBox::frame(self.image_width, self.image_height)
    }
}

/// One detector output: a box plus its confidence score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub score: f64,
}

/// Detector outputs for one image. May be empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub image_id: u64,
    pub detections: Vec<Detection>,
}

/// Options applied while loading annotation and result files.
#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// Keep only annotations/detections carrying this category id.
    pub category_id: Option<u64>,
    /// Drop detections scoring strictly below this floor.
    pub score_floor: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            category_id: None,
            score_floor: 0.0,
        }
    }
}

/// Loaded ground truth, keyed by image id.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthSet {
    pub records: BTreeMap<u64, GroundTruthRecord>,
    /// Annotations dropped because their width or height was <= 0.
    pub n_rejected_boxes: usize,
}

/// Loaded detections, keyed by image id. Every ground-truth image id is
/// present (possibly with an empty detection list), so joining is total.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub records: BTreeMap<u64, PredictionRecord>,
    pub score_floor: f64,
    /// Detections dropped for scoring below the floor.
    pub n_dropped_below_floor: usize,
}

/// Which split a dataset belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitLabel {
    Validation,
    Calibration,
    Test,
}

/// Ground truth and predictions for one image, joined on image id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub ground_truth: GroundTruthRecord,
    pub predictions: PredictionRecord,
}

/// A joined dataset: one record per image, ordered by image id.
/// `split_label` is `None` for a dataset that has not been split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionDataset {
    pub records: Vec<ImageRecord>,
    pub split_label: Option<SplitLabel>,
}

impl DetectionDataset {
    pub fn n_images(&self) -> usize {
        self.records.len()
    }

    pub fn n_ground_truth_boxes(&self) -> usize {
        self.records
            .iter()
            .map(|r| r.ground_truth.boxes.len())
            .sum()
    }

    pub fn n_detections(&self) -> usize {
        self.records
            .iter()
            .map(|r| r.predictions.detections.len())
            .sum()
    }

    /// Image frames keyed by image id, for frame clamping.
    pub fn frames(&self) -> BTreeMap<u64, BBox> {
        self.records
            .iter()
            .map(|r| (r.ground_truth.image_id, r.ground_truth.frame()))
            .collect()
    }

    /// Re-emits the ground truth as canonical COCO annotation JSON.
    pub fn save_ground_truth(&self, path: &Path) -> Result<()> {
        let images: Vec<CocoImage> = self
            .records
            .iter()
            .map(|r| CocoImage {
                id: r.ground_truth.image_id,
                width: r.ground_truth.image_width,
                height: r.ground_truth.image_height,
                file_name: r.ground_truth.file_name.clone(),
            })
            .collect();
        let mut annotations = Vec::new();
        for record in &self.records {
            for bbox in &record.ground_truth.boxes {
                annotations.push(CocoAnnotation {
                    id: annotations.len() as u64 + 1,
                    image_id: record.ground_truth.image_id,
                    category_id: Some(CANONICAL_CATEGORY_ID),
                    bbox: [bbox.x_min, bbox.y_min, bbox.width(), bbox.height()],
                    area: Some(bbox.area()),
                    iscrowd: Some(0),
                });
            }
        }
        let doc = CocoDataset {
            images,
            annotations,
            categories: vec![CocoCategory {
                id: CANONICAL_CATEGORY_ID,
                name: "object".to_string(),
            }],
        };
        write_json(path, &doc)
    }

    /// Re-emits the detections as canonical COCO results JSON.
    pub fn save_predictions(&self, path: &Path) -> Result<()> {
        let entries: Vec<(u64, BBox, f64)> = self
            .records
            .iter()
            .flat_map(|r| {
                r.predictions
                    .detections
                    .iter()
                    .map(move |d| (r.ground_truth.image_id, d.bbox, d.score))
            })
            .collect();
        save_detection_results(path, &entries)
    }
}

const CANONICAL_CATEGORY_ID: u64 = 1;

/// Writes `(image_id, box, score)` entries as COCO results JSON.
pub fn save_detection_results(path: &Path, entries: &[(u64, BBox, f64)]) -> Result<()> {
    let results: Vec<CocoResult> = entries
        .iter()
        .map(|(image_id, bbox, score)| CocoResult {
            image_id: *image_id,
            category_id: Some(CANONICAL_CATEGORY_ID),
            bbox: [bbox.x_min, bbox.y_min, bbox.width(), bbox.height()],
            score: *score,
        })
        .collect();
    write_json(path, &results)
}

// COCO wire structs. Tolerant on input (unknown fields ignored, optional
// fields defaulted), canonical on output.

#[derive(Serialize, Deserialize)]
struct CocoDataset {
    #[serde(default)]
    images: Vec<CocoImage>,
    #[serde(default)]
    annotations: Vec<CocoAnnotation>,
    #[serde(default)]
    categories: Vec<CocoCategory>,
}

#[derive(Serialize, Deserialize)]
struct CocoImage {
    id: u64,
    width: u32,
    height: u32,
    #[serde(default)]
    file_name: String,
}

#[derive(Serialize, Deserialize)]
struct CocoAnnotation {
    #[serde(default)]
    id: u64,
    image_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    category_id: Option<u64>,
    bbox: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    area: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    iscrowd: Option<u8>,
}

#[derive(Serialize, Deserialize)]
struct CocoCategory {
    id: u64,
    name: String,
}

#[derive(Serialize, Deserialize)]
struct CocoResult {
    image_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    category_id: Option<u64>,
    bbox: [f64; 4],
    score: f64,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, &e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn category_matches(filter: Option<u64>, category_id: Option<u64>) -> bool {
    match filter {
        None => true,
        Some(wanted) => category_id == Some(wanted),
    }
}

/// Loads ground truth from a COCO annotation file.
///
/// Boxes are converted from `[x, y, w, h]` to corner form and clamped to the
/// image frame; annotations with non-positive width or height are rejected
/// and counted rather than failing the load.
pub fn load_ground_truth(path: &Path, options: &LoadOptions) -> Result<GroundTruthSet> {
    let doc: CocoDataset = read_json(path)?;
    let mut records: BTreeMap<u64, GroundTruthRecord> = BTreeMap::new();
    for image in doc.images {
        let record = GroundTruthRecord {
            image_id: image.id,
            file_name: image.file_name,
            image_width: image.width,
            image_height: image.height,
            boxes: Vec::new(),
        };
        if records.insert(image.id, record).is_some() {
            return Err(Error::InvalidArgument(format!(
                "duplicate image id {} in {}",
                image.id,
                path.display()
            )));
        }
    }
    let mut n_rejected = 0usize;
    for ann in doc.annotations {
        if !category_matches(options.category_id, ann.category_id) {
            continue;
        }
        let record = records
            .get_mut(&ann.image_id)
            .ok_or_else(|| Error::UnknownImageId {
                image_id: ann.image_id,
                context: format!("annotation in {}", path.display()),
            })?;
        let [x, y, w, h] = ann.bbox;
        if !(w > 0.0 && h > 0.0) {
            n_rejected += 1;
            continue;
        }
        let bbox = BBox::from_xywh(x, y, w, h)?;
        record.boxes.push(bbox.clamp_to(&record.frame()));
    }
    if n_rejected > 0 {
        log::warn!(
            "rejected {} ground-truth boxes with non-positive extent in {}",
            n_rejected,
            path.display()
        );
    }
    Ok(GroundTruthSet {
        records,
        n_rejected_boxes: n_rejected,
    })
}

/// Loads detections from a COCO results file, validating that every entry
/// references a known image and carries a score in `[0, 1]`.
pub fn load_predictions(
    path: &Path,
    ground_truth: &GroundTruthSet,
    options: &LoadOptions,
) -> Result<PredictionSet> {
    let entries: Vec<CocoResult> = read_json(path)?;
    let mut records: BTreeMap<u64, PredictionRecord> = ground_truth
        .records
        .keys()
        .map(|&image_id| {
            (
                image_id,
                PredictionRecord {
                    image_id,
                    detections: Vec::new(),
                },
            )
        })
        .collect();
    let mut n_dropped = 0usize;
    for entry in entries {
        if !category_matches(options.category_id, entry.category_id) {
            continue;
        }
        let record = records
            .get_mut(&entry.image_id)
            .ok_or_else(|| Error::UnknownImageId {
                image_id: entry.image_id,
                context: format!("detection in {}", path.display()),
            })?;
        if !(0.0..=1.0).contains(&entry.score) {
            return Err(Error::ScoreOutOfRange {
                image_id: entry.image_id,
                score: entry.score,
            });
        }
        if entry.score < options.score_floor {
            n_dropped += 1;
            continue;
        }
        let [x, y, w, h] = entry.bbox;
        record.detections.push(Detection {
            bbox: BBox::from_xywh(x, y, w, h)?,
            score: entry.score,
        });
    }
    Ok(PredictionSet {
        records,
        score_floor: options.score_floor,
        n_dropped_below_floor: n_dropped,
    })
}

/// Joins ground truth and predictions into one dataset ordered by image id.
/// The join is total by construction of [`load_predictions`].
pub fn join(ground_truth: GroundTruthSet, predictions: PredictionSet) -> DetectionDataset {
    let mut predictions = predictions;
    let records = ground_truth
        .records
        .into_values()
        .map(|gt| {
            let preds = predictions
                .records
                .remove(&gt.image_id)
                .unwrap_or(PredictionRecord {
                    image_id: gt.image_id,
                    detections: Vec::new(),
                });
            ImageRecord {
                ground_truth: gt,
                predictions: preds,
            }
        })
        .collect();
    DetectionDataset {
        records,
        split_label: None,
    }
}

/// Loads and joins a ground-truth/results file pair.
pub fn load_dataset(
    ground_truth_path: &Path,
    predictions_path: &Path,
    options: &LoadOptions,
) -> Result<DetectionDataset> {
    let gt = load_ground_truth(ground_truth_path, options)?;
    let preds = load_predictions(predictions_path, &gt, options)?;
    Ok(join(gt, preds))
}

/// Requested sizes for the validation/calibration/test partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSizes {
    pub n_validation: usize,
    pub n_calibration: usize,
    pub n_test: usize,
}

impl SplitSizes {
    pub fn total(&self) -> usize {
        self.n_validation + self.n_calibration + self.n_test
    }
}

/// Partitions a dataset into validation/calibration/test subsets.
///
/// Assignment is image-level (never box-level) so that exchangeability across
/// images is preserved, and deterministic under a fixed seed. Images are
/// sampled uniformly; stratified splitting is left to callers that need it.
pub fn split(
    dataset: &DetectionDataset,
    sizes: SplitSizes,
    seed: u64,
) -> Result<(DetectionDataset, DetectionDataset, DetectionDataset)> {
    let available = dataset.n_images();
    if sizes.total() > available {
        return Err(Error::SplitTooLarge {
            requested: sizes.total(),
            available,
        });
    }
    let mut order: Vec<usize> = (0..available).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let subset = |range: std::ops::Range<usize>, label: SplitLabel| {
        let mut picked: Vec<usize> = order[range].to_vec();
        picked.sort_unstable();
        DetectionDataset {
            records: picked.iter().map(|&i| dataset.records[i].clone()).collect(),
            split_label: Some(label),
        }
    };

    let validation = subset(0..sizes.n_validation, SplitLabel::Validation);
    let calibration = subset(
        sizes.n_validation..sizes.n_validation + sizes.n_calibration,
        SplitLabel::Calibration,
    );
    let test = subset(
        sizes.n_validation + sizes.n_calibration..sizes.total(),
        SplitLabel::Test,
    );
    Ok((validation, calibration, test))
}
