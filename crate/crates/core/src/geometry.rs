//! Axis-aligned box arithmetic: area, intersection, IoU, containment, clamping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An axis-aligned rectangle in pixel coordinates, stored as
/// `(x_min, y_min, x_max, y_max)` with real-valued (sub-pixel) corners.
///
/// Invariants: `x_min <= x_max`, `y_min <= y_max`, all coordinates finite.
/// Zero-width or zero-height boxes are legal values; operations that would
/// divide by a zero extent reject them at the call site instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    /// Builds a box from corner coordinates, validating the invariants.
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let reason = if ![x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite()) {
            Some("coordinates must be finite")
        } else if x_min > x_max {
            Some("x_min exceeds x_max")
        } else if y_min > y_max {
            Some("y_min exceeds y_max")
        } else {
            None
        };
        match reason {
            Some(reason) => Err(Error::InvalidBox {
                x_min,
                y_min,
                x_max,
                y_max,
                reason,
            }),
            None => Ok(BBox {
                x_min,
                y_min,
                x_max,
                y_max,
            }),
        }
    }

    /// Builds a box from COCO `[x, y, width, height]` corner-plus-extent form.
    pub fn from_xywh(x: f64, y: f64, width: f64, height: f64) -> Result<Self> {
        BBox::new(x, y, x + width, y + height)
    }

    /// The full image frame `(0, 0, width, height)`.
    pub fn frame(width: u32, height: u32) -> Self {
        BBox {
            x_min: 0.0,
            y_min: 0.0,
            x_max: f64::from(width),
            y_max: f64::from(height),
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// True when the box has zero width or zero height.
    pub fn is_degenerate(&self) -> bool {
        self.width() <= 0.0 || self.height() <= 0.0
    }

    /// Intersection over union with `other`; 0 when the union has zero area.
    pub fn iou(&self, other: &BBox) -> f64 {
        let ix = (self.x_max.min(other.x_max) - self.x_min.max(other.x_min)).max(0.0);
        let iy = (self.y_max.min(other.y_max) - self.y_min.max(other.y_min)).max(0.0);
        let intersection = ix * iy;
        let union = self.area() + other.area() - intersection;
        if union <= 0.0 {
            0.0
        } else {
            intersection / union
        }
    }

    /// True iff `inner` lies entirely inside `self` (boundary contact counts).
    pub fn contains(&self, inner: &BBox) -> bool {
        self.x_min <= inner.x_min
            && self.y_min <= inner.y_min
            && self.x_max >= inner.x_max
            && self.y_max >= inner.y_max
    }

    /// Clips every coordinate into `frame`. The result is always a valid box;
    /// a box fully outside the frame collapses onto the nearest frame edge.
    pub fn clamp_to(&self, frame: &BBox) -> BBox {
        BBox {
            x_min: self.x_min.clamp(frame.x_min, frame.x_max),
            y_min: self.y_min.clamp(frame.y_min, frame.y_max),
            x_max: self.x_max.clamp(frame.x_min, frame.x_max),
            y_max: self.y_max.clamp(frame.y_min, frame.y_max),
        }
    }
}
