//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by loading, calibration, and evaluation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Box coordinates violate `x_min <= x_max`, `y_min <= y_max`, or are non-finite.
    #[error("invalid box ({x_min}, {y_min}, {x_max}, {y_max}): {reason}")]
    InvalidBox {
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
        reason: &'static str,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON in {path} at line {line}, column {column}: {message}")]
    Json {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    /// An annotation or detection references an image id absent from the ground truth.
    #[error("{context} references unknown image id {image_id}")]
    UnknownImageId { image_id: u64, context: String },

    /// A detection confidence falls outside `[0, 1]`.
    #[error("confidence score {score} outside [0, 1] for image {image_id}")]
    ScoreOutOfRange { image_id: u64, score: f64 },

    /// Requested split sizes exceed the number of available images.
    #[error("split sizes {requested} exceed available image count {available}")]
    SplitTooLarge { requested: usize, available: usize },

    /// A caller-supplied parameter is out of its documented range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Multiplicative scoring or conformalization hit a zero-width/height prediction.
    #[error(
        "degenerate prediction ({x_min}, {y_min}, {x_max}, {y_max}){}: \
         multiplicative mode requires positive width and height",
        .image_id.map(|id| format!(" on image {id}")).unwrap_or_default()
    )]
    DegeneratePrediction {
        image_id: Option<u64>,
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
    },

    /// The calibration quantile rank exceeded the sample size.
    #[error(
        "margins are unbounded (n_box = {n_box}, alpha = {alpha}): insufficient calibration data; \
         calibrate on more pairs or increase alpha"
    )]
    UnboundedMargins { n_box: usize, alpha: f64 },

    /// A margins file was produced under a different score mode than requested.
    #[error("margins were calibrated in {margins_mode} mode but {requested} mode was requested")]
    ModeMismatch {
        margins_mode: String,
        requested: String,
    },

    /// Average precision over a dataset with no ground-truth boxes is undefined.
    #[error("dataset has no ground-truth boxes; average precision is undefined")]
    NoGroundTruth,

    /// The synthetic generator configuration cannot produce valid data.
    #[error("infeasible generator config: {0}")]
    InfeasibleConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: &serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            line: source.line(),
            column: source.column(),
            message: source.to_string(),
        }
    }
}
