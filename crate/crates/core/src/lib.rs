//! Conformal calibration of bounding-box predictions.
//!
//! Given any object detector's boxes and a held-out calibration set, this
//! crate computes per-coordinate margins that, applied at inference, make the
//! enlarged boxes contain the whole ground-truth box at a configurable rate —
//! with a distribution-free, finite-sample guarantee that only assumes the
//! images are exchangeable. It also evaluates what that guarantee costs
//! (stretch), how the base detector performs (Average Precision), and ships a
//! synthetic-data Monte Carlo harness that checks the guarantee end to end.
//!
//! The pipeline:
//!
//! 1. load COCO-style annotations and detection results ([`dataset`]);
//! 2. pair predictions to ground truths per image ([`pairing`]);
//! 3. calibrate margins from the paired residuals ([`conformal`]);
//! 4. apply the margins to new detections ([`conformal::conformalize`]);
//! 5. measure coverage, stretch, and AP ([`metrics`]).

pub mod conformal;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod pairing;
pub mod synthetic;

pub use conformal::{
    calibrate, conformal_quantile, conformalize, score, MarginSet, ScoreMode, ScoreVector,
};
pub use dataset::{
    join, load_dataset, load_ground_truth, load_predictions, save_detection_results, split,
    Detection, DetectionDataset, GroundTruthRecord, GroundTruthSet, ImageRecord, LoadOptions,
    PredictionRecord, PredictionSet, SplitLabel, SplitSizes,
};
pub use error::{Error, Result};
pub use geometry::BBox;
pub use metrics::{
    average_precision, coverage, precision_recall, stretch, CoverageReport, PrCurve, PrPoint,
};
pub use pairing::{
    match_dataset, match_image, pooled_pairs, stats, MatchReport, MatchStats, MatchedPair,
};
pub use synthetic::{
    generate, monte_carlo_coverage, ConfidenceModel, GeneratorConfig, MonteCarloConfig,
    MonteCarloReport, NoiseKind, NoiseModel, ResampleScheme,
};
