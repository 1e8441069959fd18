//! Synthetic detection datasets with controlled error distributions, and a
//! Monte Carlo harness that validates the coverage guarantee end to end.
//!
//! Images are generated i.i.d., so the exchangeability assumption behind the
//! coverage guarantee holds by construction: truths are placed uniformly in
//! the frame, predictions perturb each truth edge independently, truths are
//! dropped at the miss rate, and spurious detections arrive Poisson-
//! distributed per image. Confidences follow a logistic curve in the IoU with
//! the source truth plus noise, so confidence ordering is informative but
//! imperfect — which exercises the confidence-first pairing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::{calibrate, ScoreMode};
use crate::dataset::{
    split, Detection, DetectionDataset, GroundTruthRecord, ImageRecord, PredictionRecord,
    SplitSizes,
};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::metrics::coverage;
use crate::pairing::{match_dataset, pooled_pairs};

/// Generated coordinates are snapped to this grid (1/1024 px). Grid values in
/// frame-sized ranges survive the xyxy <-> xywh conversion of COCO files
/// exactly, so emitted datasets round-trip bit-for-bit.
const COORD_GRID: f64 = 1024.0;

/// Minimum width/height of a generated prediction, in pixels. Keeps
/// multiplicative scores well-defined under extreme noise.
const MIN_PREDICTION_EXTENT: f64 = 1.0;

fn snap(value: f64) -> f64 {
    (value * COORD_GRID).round() / COORD_GRID
}

/// Maps IoU-with-truth to a confidence score: a logistic curve plus Gaussian
/// noise, clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceModel {
    pub steepness: f64,
    pub midpoint: f64,
    pub noise_scale: f64,
}

impl Default for ConfidenceModel {
    fn default() -> Self {
        ConfidenceModel {
            steepness: 8.0,
            midpoint: 0.5,
            noise_scale: 0.1,
        }
    }
}

impl ConfidenceModel {
    fn sample(&self, iou: f64, rng: &mut ChaCha8Rng) -> f64 {
        let logistic = 1.0 / (1.0 + (-self.steepness * (iou - self.midpoint)).exp());
        let noise = if self.noise_scale > 0.0 {
            Normal::new(0.0, self.noise_scale)
                .expect("valid normal")
                .sample(rng)
        } else {
            0.0
        };
        (logistic + noise).clamp(0.0, 1.0)
    }
}

/// How edge noise scales.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Noise standard deviation is `edge_noise_scale` times the box
    /// width (x edges) or height (y edges).
    #[default]
    Relative,
    /// Noise standard deviation is `edge_noise_scale` pixels on every edge.
    AbsolutePixels,
}

/// The detector error model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Per-edge noise scale; see [`NoiseKind`] for units.
    pub edge_noise_scale: f64,
    #[serde(default)]
    pub noise_kind: NoiseKind,
    /// Probability of dropping each ground-truth box, in `[0, 1)`.
    pub miss_rate: f64,
    /// Expected spurious boxes per image (Poisson), `>= 0`.
    pub false_positive_rate: f64,
    #[serde(default)]
    pub confidence: ConfidenceModel,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            edge_noise_scale: 0.1,
            noise_kind: NoiseKind::Relative,
            miss_rate: 0.1,
            false_positive_rate: 0.5,
            confidence: ConfidenceModel::default(),
            seed: 42,
        }
    }
}

/// Full description of a synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_images: usize,
    /// Mean of the per-image Poisson box count.
    pub boxes_per_image: f64,
    pub frame_width: u32,
    pub frame_height: u32,
    /// Truth widths and heights are drawn uniformly from this range.
    pub min_box_size: f64,
    pub max_box_size: f64,
    #[serde(default)]
    pub noise: NoiseModel,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_images: 200,
            boxes_per_image: 3.0,
            frame_width: 1280,
            frame_height: 720,
            min_box_size: 24.0,
            max_box_size: 120.0,
            noise: NoiseModel::default(),
        }
    }
}

impl GeneratorConfig {
    fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InfeasibleConfig(msg));
        if self.frame_width == 0 || self.frame_height == 0 {
            return fail("frame must have positive area".to_string());
        }
        let sizes_ok = self.min_box_size > 0.0 && self.min_box_size <= self.max_box_size;
        if !sizes_ok {
            return fail(format!(
                "box size range [{}, {}] must be positive and ordered",
                self.min_box_size, self.max_box_size
            ));
        }
        let frame_min = f64::from(self.frame_width.min(self.frame_height));
        if self.max_box_size > frame_min {
            return fail(format!(
                "max box size {} exceeds the smaller frame dimension {}",
                self.max_box_size, frame_min
            ));
        }
        if !(0.0..1.0).contains(&self.noise.miss_rate) {
            return fail(format!("miss rate {} outside [0, 1)", self.noise.miss_rate));
        }
        if !(self.noise.false_positive_rate >= 0.0 && self.noise.false_positive_rate.is_finite()) {
            return fail(format!(
                "false positive rate {} must be finite and non-negative",
                self.noise.false_positive_rate
            ));
        }
        if !(self.noise.edge_noise_scale >= 0.0 && self.noise.edge_noise_scale.is_finite()) {
            return fail(format!(
                "edge noise scale {} must be finite and non-negative",
                self.noise.edge_noise_scale
            ));
        }
        if !(self.boxes_per_image >= 0.0 && self.boxes_per_image.is_finite()) {
            return fail(format!(
                "boxes per image {} must be finite and non-negative",
                self.boxes_per_image
            ));
        }
        Ok(())
    }

    fn frame(&self) -> BBox {
        BBox::frame(self.frame_width, self.frame_height)
    }
}

fn poisson_count(mean: f64, rng: &mut ChaCha8Rng) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("validated mean");
    dist.sample(rng) as usize
}

fn sample_truth(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> BBox {
    let width = rng.gen_range(cfg.min_box_size..=cfg.max_box_size);
    let height = rng.gen_range(cfg.min_box_size..=cfg.max_box_size);
    let x = rng.gen_range(0.0..=(f64::from(cfg.frame_width) - width));
    let y = rng.gen_range(0.0..=(f64::from(cfg.frame_height) - height));
    let frame = cfg.frame();
    BBox {
        x_min: snap(x),
        y_min: snap(y),
        x_max: snap(x + width),
        y_max: snap(y + height),
    }
    .clamp_to(&frame)
}

/// Perturbs one axis of a truth interval and forces the result to be a valid
/// in-frame interval of at least `MIN_PREDICTION_EXTENT`.
fn perturb_axis(lo: f64, hi: f64, sigma: f64, frame_max: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let (mut lo, mut hi) = if sigma > 0.0 {
        let a = lo + sigma * normal.sample(rng);
        let b = hi + sigma * normal.sample(rng);
        (a.min(b), a.max(b))
    } else {
        (lo, hi)
    };
    let min_extent = MIN_PREDICTION_EXTENT.min(frame_max);
    if hi - lo < min_extent {
        let mid = 0.5 * (lo + hi);
        lo = mid - 0.5 * min_extent;
        hi = mid + 0.5 * min_extent;
    }
    if lo < 0.0 {
        hi -= lo;
        lo = 0.0;
    }
    if hi > frame_max {
        lo -= hi - frame_max;
        hi = frame_max;
    }
    (snap(lo.max(0.0)), snap(hi.min(frame_max)))
}

fn perturb(truth: &BBox, noise: &NoiseModel, frame: &BBox, rng: &mut ChaCha8Rng) -> BBox {
    let (sigma_x, sigma_y) = match noise.noise_kind {
        NoiseKind::Relative => (
            noise.edge_noise_scale * truth.width(),
            noise.edge_noise_scale * truth.height(),
        ),
        NoiseKind::AbsolutePixels => (noise.edge_noise_scale, noise.edge_noise_scale),
    };
    let (x_min, x_max) = perturb_axis(truth.x_min, truth.x_max, sigma_x, frame.x_max, rng);
    let (y_min, y_max) = perturb_axis(truth.y_min, truth.y_max, sigma_y, frame.y_max, rng);
    BBox {
        x_min,
        y_min,
        x_max,
        y_max,
    }
}

/// Generates an i.i.d. synthetic dataset. The same config (seed included)
/// always produces the identical dataset.
pub fn generate(cfg: &GeneratorConfig) -> Result<DetectionDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.noise.seed);
    let frame = cfg.frame();
    let mut records = Vec::with_capacity(cfg.n_images);

    for image_index in 0..cfg.n_images {
        let image_id = image_index as u64 + 1;
        let n_truths = poisson_count(cfg.boxes_per_image, &mut rng);
        let truths: Vec<BBox> = (0..n_truths).map(|_| sample_truth(cfg, &mut rng)).collect();

        let mut detections = Vec::new();
        for truth in &truths {
            if rng.gen::<f64>() < cfg.noise.miss_rate {
                continue;
            }
            let bbox = perturb(truth, &cfg.noise, &frame, &mut rng);
            let score = cfg.noise.confidence.sample(bbox.iou(truth), &mut rng);
            detections.push(Detection { bbox, score });
        }
        let n_spurious = poisson_count(cfg.noise.false_positive_rate, &mut rng);
        for _ in 0..n_spurious {
            let bbox = sample_truth(cfg, &mut rng);
            let best_iou = truths.iter().map(|t| bbox.iou(t)).fold(0.0f64, f64::max);
            let score = cfg.noise.confidence.sample(best_iou, &mut rng);
            detections.push(Detection { bbox, score });
        }

        records.push(ImageRecord {
            ground_truth: GroundTruthRecord {
                image_id,
                file_name: format!("synthetic_{image_id:06}.png"),
                image_width: cfg.frame_width,
                image_height: cfg.frame_height,
                boxes: truths,
            },
            predictions: PredictionRecord {
                image_id,
                detections,
            },
        });
    }

    Ok(DetectionDataset {
        records,
        split_label: None,
    })
}

/// Whether each repetition draws a fresh dataset or re-splits a fixed one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleScheme {
    #[default]
    FreshDataset,
    ResplitFixed,
}

/// Parameters of a Monte Carlo coverage run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub generator: GeneratorConfig,
    pub alpha: f64,
    pub mode: ScoreMode,
    pub repetitions: usize,
    /// Fraction of images assigned to calibration; the rest are test images.
    pub cal_fraction: f64,
    pub iou_threshold: f64,
    #[serde(default)]
    pub scheme: ResampleScheme,
}

/// Aggregated coverage over the repetitions.
///
/// Coverage here is always measured on unclamped conformal boxes: clamping
/// happens after the guarantee-bearing construction and cannot evict an
/// in-frame truth, so the unclamped number is the conservative one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub repetitions: usize,
    pub alpha: f64,
    pub mode: ScoreMode,
    pub iou_threshold: f64,
    pub cal_fraction: f64,
    pub per_rep_coverage: Vec<f64>,
    pub mean_coverage: f64,
    /// Sample standard deviation of the per-repetition coverages.
    pub std_coverage: f64,
    pub mean_stretch: f64,
    /// Repetitions excluded because calibration produced unbounded margins.
    pub n_excluded_unbounded: usize,
    /// Repetitions excluded because the test subset had no matched pairs.
    pub n_excluded_empty: usize,
}

enum RepOutcome {
    Covered { coverage: f64, stretch: f64 },
    Unbounded,
    EmptyTest,
}

fn run_repetition(
    cfg: &MonteCarloConfig,
    fixed: Option<&DetectionDataset>,
    rep: usize,
) -> Result<RepOutcome> {
    let rep_seed = cfg.generator.noise.seed.wrapping_add(rep as u64);
    let dataset = match fixed {
        Some(base) => base.clone(),
        None => {
            let mut generator = cfg.generator;
            generator.noise.seed = rep_seed;
            generate(&generator)?
        }
    };
    let n = dataset.n_images();
    let n_cal = ((n as f64 * cfg.cal_fraction).floor() as usize).clamp(1, n - 1);
    let sizes = SplitSizes {
        n_validation: 0,
        n_calibration: n_cal,
        n_test: n - n_cal,
    };
    let (_, cal, test) = split(&dataset, sizes, rep_seed)?;

    let cal_pairs = pooled_pairs(&match_dataset(&cal, cfg.iou_threshold));
    let margins = calibrate(&cal_pairs, cfg.alpha, cfg.mode, cfg.iou_threshold)?;
    if margins.unbounded {
        return Ok(RepOutcome::Unbounded);
    }
    let test_pairs = pooled_pairs(&match_dataset(&test, cfg.iou_threshold));
    if test_pairs.is_empty() {
        return Ok(RepOutcome::EmptyTest);
    }
    let report = coverage(&test_pairs, Some(&margins), None)?;
    Ok(RepOutcome::Covered {
        coverage: report.empirical_coverage,
        stretch: report.stretch,
    })
}

/// Runs the full generate → pair → calibrate → evaluate loop `repetitions`
/// times and aggregates the empirical coverages.
///
/// Repetitions are independent (seed = base seed + repetition index) and run
/// in parallel; results are assembled in repetition order so the report is
/// deterministic regardless of scheduling.
pub fn monte_carlo_coverage(cfg: &MonteCarloConfig) -> Result<MonteCarloReport> {
    if cfg.repetitions == 0 {
        return Err(Error::InvalidArgument(
            "repetitions must be at least 1".to_string(),
        ));
    }
    if !(cfg.cal_fraction > 0.0 && cfg.cal_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "cal_fraction {} outside (0, 1)",
            cfg.cal_fraction
        )));
    }
    if cfg.generator.n_images < 2 {
        return Err(Error::InvalidArgument(
            "monte carlo needs at least 2 images to split".to_string(),
        ));
    }
    cfg.generator.validate()?;

    let fixed = match cfg.scheme {
        ResampleScheme::ResplitFixed => Some(generate(&cfg.generator)?),
        ResampleScheme::FreshDataset => None,
    };

    let outcomes: Vec<Result<RepOutcome>> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| run_repetition(cfg, fixed.as_ref(), rep))
        .collect();

    let mut per_rep_coverage = Vec::with_capacity(cfg.repetitions);
    let mut stretches = Vec::with_capacity(cfg.repetitions);
    let mut n_unbounded = 0usize;
    let mut n_empty = 0usize;
    for outcome in outcomes {
        match outcome? {
            RepOutcome::Covered { coverage, stretch } => {
                per_rep_coverage.push(coverage);
                stretches.push(stretch);
            }
            RepOutcome::Unbounded => n_unbounded += 1,
            RepOutcome::EmptyTest => n_empty += 1,
        }
    }

    let mean = |values: &[f64]| {
        if values.is_empty() {
            0.0
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        }
    };
    let mean_coverage = mean(&per_rep_coverage);
    let std_coverage = if per_rep_coverage.len() < 2 {
        0.0
    } else {
        let m = mean_coverage;
        let var = per_rep_coverage
            .iter()
            .map(|c| (c - m).powi(2))
            .sum::<f64>()
            / (per_rep_coverage.len() - 1) as f64;
        var.sqrt()
    };

    Ok(MonteCarloReport {
        repetitions: cfg.repetitions,
        alpha: cfg.alpha,
        mode: cfg.mode,
        iou_threshold: cfg.iou_threshold,
        cal_fraction: cfg.cal_fraction,
        mean_stretch: mean(&stretches),
        per_rep_coverage,
        mean_coverage,
        std_coverage,
        n_excluded_unbounded: n_unbounded,
        n_excluded_empty: n_empty,
    })
}
