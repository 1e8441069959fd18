//! Nonconformity scores, Bonferroni-corrected quantile margins, and the
//! construction of conformal boxes.
//!
//! Calibration pools the matched pairs of a held-out set, computes one signed
//! residual per box side (additive mode) or the residual divided by the
//! predicted width/height (multiplicative mode), and takes the
//! `ceil((n+1) * (1 - alpha/4))`-th smallest value per coordinate. The error
//! budget is split across the four coordinates so that containment of the
//! whole ground-truth box holds with probability at least `1 - alpha`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::pairing::MatchedPair;

/// Which nonconformity score family to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// Signed residuals in pixels.
    Additive,
    /// Residuals as fractions of the predicted width/height.
    Multiplicative,
}

impl fmt::Display for ScoreMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoreMode::Additive => write!(f, "additive"),
            ScoreMode::Multiplicative => write!(f, "multiplicative"),
        }
    }
}

impl FromStr for ScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "additive" => Ok(ScoreMode::Additive),
            "multiplicative" => Ok(ScoreMode::Multiplicative),
            other => Err(Error::InvalidArgument(format!(
                "unknown score mode '{other}' (expected 'additive' or 'multiplicative')"
            ))),
        }
    }
}

/// A per-coordinate quadruple: one value for each box side.
///
/// Used both for the nonconformity scores of a single pair and for the
/// calibrated margins. Components may be negative — a prediction that already
/// over-covers on a side has a negative residual, and negative margins
/// legitimately shrink boxes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl ScoreVector {
    pub const ZERO: ScoreVector = ScoreVector {
        x_min: 0.0,
        y_min: 0.0,
        x_max: 0.0,
        y_max: 0.0,
    };

    pub fn as_array(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        ScoreVector {
            x_min: a[0],
            y_min: a[1],
            x_max: a[2],
            y_max: a[3],
        }
    }
}

/// Calibrated per-coordinate margins plus the metadata needed to reuse them.
///
/// `q` is `None` exactly when `unbounded` is true: the quantile rank exceeded
/// the number of calibration pairs, so no finite margin attains the requested
/// level. Serialized as
/// `{alpha, mode, n_box, iou_threshold, q: {x_min, ...} | null, unbounded}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginSet {
    pub alpha: f64,
    pub mode: ScoreMode,
    pub n_box: usize,
    pub iou_threshold: f64,
    pub q: Option<ScoreVector>,
    pub unbounded: bool,
}

impl MarginSet {
    /// A margin set with finite quantiles.
    pub fn bounded(
        alpha: f64,
        mode: ScoreMode,
        n_box: usize,
        iou_threshold: f64,
        q: ScoreVector,
    ) -> Self {
        MarginSet {
            alpha,
            mode,
            n_box,
            iou_threshold,
            q: Some(q),
            unbounded: false,
        }
    }

    /// A margin set whose quantile rank overflowed the calibration set.
    pub fn new_unbounded(alpha: f64, mode: ScoreMode, n_box: usize, iou_threshold: f64) -> Self {
        MarginSet {
            alpha,
            mode,
            n_box,
            iou_threshold,
            q: None,
            unbounded: true,
        }
    }

    /// The quantiles, or the unbounded-margins error.
    pub fn quantiles(&self) -> Result<ScoreVector> {
        self.q.ok_or(Error::UnboundedMargins {
            n_box: self.n_box,
            alpha: self.alpha,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("margin set serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let margins: MarginSet = serde_json::from_str(&text).map_err(|e| Error::json(path, &e))?;
        margins.validate()?;
        Ok(margins)
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "margin set alpha {} outside (0, 1)",
                self.alpha
            )));
        }
        if self.unbounded != self.q.is_none() {
            return Err(Error::InvalidArgument(
                "margin set 'unbounded' flag disagrees with presence of 'q'".to_string(),
            ));
        }
        if let Some(q) = &self.q {
            if !q.as_array().iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidArgument(
                    "bounded margin set contains non-finite quantiles".to_string(),
                ));
            }
        }
        Ok(())
    }
}

/// Computes the nonconformity score of a matched pair.
///
/// Additive: `(pred.x_min - truth.x_min, pred.y_min - truth.y_min,
/// truth.x_max - pred.x_max, truth.y_max - pred.y_max)` — positive where the
/// prediction falls short of covering the truth. Multiplicative divides the
/// x components by the predicted width and the y components by the predicted
/// height, and rejects zero-extent predictions.
pub fn score(pair: &MatchedPair, mode: ScoreMode) -> Result<ScoreVector> {
    let truth = &pair.truth;
    let pred = &pair.prediction;
    let raw = ScoreVector {
        x_min: pred.x_min - truth.x_min,
        y_min: pred.y_min - truth.y_min,
        x_max: truth.x_max - pred.x_max,
        y_max: truth.y_max - pred.y_max,
    };
    match mode {
        ScoreMode::Additive => Ok(raw),
        ScoreMode::Multiplicative => {
            let width = pred.width();
            let height = pred.height();
            if width <= 0.0 || height <= 0.0 {
                return Err(degenerate(Some(pair.image_id), pred));
            }
            Ok(ScoreVector {
                x_min: raw.x_min / width,
                y_min: raw.y_min / height,
                x_max: raw.x_max / width,
                y_max: raw.y_max / height,
            })
        }
    }
}

fn degenerate(image_id: Option<u64>, pred: &BBox) -> Error {
    Error::DegeneratePrediction {
        image_id,
        x_min: pred.x_min,
        y_min: pred.y_min,
        x_max: pred.x_max,
        y_max: pred.y_max,
    }
}

/// The split-conformal empirical quantile: the `ceil((n+1) * level)`-th
/// smallest score (1-indexed, ties kept as duplicates), or `None` when that
/// rank exceeds `n` and no finite value attains the level.
///
/// `level` must lie in `(0, 1)`. The input may be empty, in which case the
/// result is always `None`.
pub fn conformal_quantile(scores: &[f64], level: f64) -> Result<Option<f64>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile level {level} outside (0, 1)"
        )));
    }
    let n = scores.len();
    let rank = ((n as f64 + 1.0) * level).ceil() as usize;
    if rank > n {
        return Ok(None);
    }
    let mut values = scores.to_vec();
    let (_, kth, _) = values.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Ok(Some(*kth))
}

/// Calibrates per-coordinate margins from matched pairs.
///
/// Each coordinate's margin is the conformal quantile of its score sequence
/// at level `1 - alpha/4` (the budget is split over the four coordinates).
/// An empty pair set, or a rank overflow, yields an unbounded margin set
/// rather than silently clamping to the largest observed score.
pub fn calibrate(
    pairs: &[MatchedPair],
    alpha: f64,
    mode: ScoreMode,
    iou_threshold: f64,
) -> Result<MarginSet> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha {alpha} outside (0, 1)"
        )));
    }
    if pairs.is_empty() {
        log::warn!("calibrating on an empty pair set: margins are unbounded");
        return Ok(MarginSet::new_unbounded(alpha, mode, 0, iou_threshold));
    }
    let level = 1.0 - alpha / 4.0;
    let vectors: Vec<ScoreVector> = pairs
        .iter()
        .map(|pair| score(pair, mode))
        .collect::<Result<_>>()?;

    let mut quantiles = [0.0f64; 4];
    for (coord, slot) in quantiles.iter_mut().enumerate() {
        let coordinate_scores: Vec<f64> = vectors.iter().map(|v| v.as_array()[coord]).collect();
        match conformal_quantile(&coordinate_scores, level)? {
            Some(value) => *slot = value,
            None => {
                return Ok(MarginSet::new_unbounded(
                    alpha,
                    mode,
                    pairs.len(),
                    iou_threshold,
                ))
            }
        }
    }
    Ok(MarginSet::bounded(
        alpha,
        mode,
        pairs.len(),
        iou_threshold,
        ScoreVector::from_array(quantiles),
    ))
}

/// Expands (or, under negative margins, shrinks) a predicted box into its
/// conformal box.
///
/// Additive subtracts the min-side margins and adds the max-side margins;
/// multiplicative scales each margin by the predicted width or height first.
/// If negative margins invert an axis the box collapses to its midline, and
/// if `frame` is given the result is clipped to it afterwards — the
/// guarantee-bearing construction happens before clamping.
pub fn conformalize(prediction: &BBox, margins: &MarginSet, frame: Option<&BBox>) -> Result<BBox> {
    let q = margins.quantiles()?;
    let (mx_min, my_min, mx_max, my_max) = match margins.mode {
        ScoreMode::Additive => (q.x_min, q.y_min, q.x_max, q.y_max),
        ScoreMode::Multiplicative => {
            let width = prediction.width();
            let height = prediction.height();
            if width <= 0.0 || height <= 0.0 {
                return Err(degenerate(None, prediction));
            }
            (
                width * q.x_min,
                height * q.y_min,
                width * q.x_max,
                height * q.y_max,
            )
        }
    };

    let mut x_lo = prediction.x_min - mx_min;
    let mut x_hi = prediction.x_max + mx_max;
    let mut y_lo = prediction.y_min - my_min;
    let mut y_hi = prediction.y_max + my_max;
    if x_lo > x_hi {
        let mid = 0.5 * (x_lo + x_hi);
        x_lo = mid;
        x_hi = mid;
    }
    if y_lo > y_hi {
        let mid = 0.5 * (y_lo + y_hi);
        y_lo = mid;
        y_hi = mid;
    }
    let mut result = BBox {
        x_min: x_lo,
        y_min: y_lo,
        x_max: x_hi,
        y_max: y_hi,
    };
    if let Some(frame) = frame {
        result = result.clamp_to(frame);
    }
    Ok(result)
}
