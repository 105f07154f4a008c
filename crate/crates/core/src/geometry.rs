//! Axis-aligned boxes in normalized image coordinates and their overlap.
//!
//! Boxes use the corner layout `[x1, y1, x2, y2]` with every coordinate in
//! `[0, 1]`. Policy outputs live in an unconstrained "center / log-size"
//! space and are mapped back onto valid boxes with [`clamp_to_unit`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest area a decoded box may have.
pub const MIN_AREA: f64 = 1e-4;

/// Side length of the smallest square box, `sqrt(MIN_AREA)`.
const MIN_SIDE: f64 = 1e-2;

/// Axis-aligned rectangle with `x1 < x2`, `y1 < y2`, all coordinates in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        let coords = [x1, y1, x2, y2];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::input(format!(
                "box has non-finite coordinate: {coords:?}"
            )));
        }
        if coords.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::input(format!(
                "box coordinate outside [0, 1]: {coords:?}"
            )));
        }
        if x1 >= x2 || y1 >= y2 {
            return Err(Error::input(format!(
                "degenerate box (zero or negative area): {coords:?}"
            )));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    /// Build a box from pixel corners of an image of the given size.
    pub fn from_pixels(corners: [f64; 4], width: f64, height: f64) -> Result<Self> {
        if !(width > 0.0 && height > 0.0) {
            return Err(Error::input(format!(
                "image size must be positive, got {width}x{height}"
            )));
        }
        Self::new(
            corners[0] / width,
            corners[1] / height,
            corners[2] / width,
            corners[3] / height,
        )
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn y1(&self) -> f64 {
        self.y1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn corners(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    /// `(center-x, center-y, ln width, ln height)`.
    pub fn encode(&self) -> [f64; 4] {
        [
            0.5 * (self.x1 + self.x2),
            0.5 * (self.y1 + self.y2),
            self.width().ln(),
            self.height().ln(),
        ]
    }

    pub fn contains(&self, other: &BBox) -> bool {
        self.x1 <= other.x1 && self.y1 <= other.y1 && self.x2 >= other.x2 && self.y2 >= other.y2
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = Error;

    fn try_from(c: [f64; 4]) -> Result<Self> {
        BBox::new(c[0], c[1], c[2], c[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        b.corners()
    }
}

/// Intersection over union. Zero for disjoint boxes, one for identical boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Decode a raw `(center-x, center-y, log-width, log-height)` vector into a
/// valid box.
///
/// Sizes are exponentiated, corners clipped to the unit square, and any side
/// shorter than `sqrt(MIN_AREA)` is widened around its center (shifted back
/// inside the image when needed), so the result always has area of at least
/// [`MIN_AREA`].
pub fn clamp_to_unit(raw: [f64; 4]) -> Result<BBox> {
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::input(format!(
            "raw box vector is not finite: {raw:?}"
        )));
    }
    let [cx, cy, log_w, log_h] = raw;
    let (x1, x2) = clip_axis(cx, log_w.exp());
    let (y1, y2) = clip_axis(cy, log_h.exp());
    BBox::new(x1, y1, x2, y2)
}

fn clip_axis(center: f64, size: f64) -> (f64, f64) {
    let half = 0.5 * size;
    let lo = (center - half).clamp(0.0, 1.0);
    let hi = (center + half).clamp(0.0, 1.0);
    if hi - lo >= MIN_SIDE {
        return (lo, hi);
    }
    let mid = (0.5 * (lo + hi)).clamp(0.5 * MIN_SIDE, 1.0 - 0.5 * MIN_SIDE);
    (mid - 0.5 * MIN_SIDE, mid + 0.5 * MIN_SIDE)
}
