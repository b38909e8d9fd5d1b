//! Axis-aligned box geometry in normalized `[0,1]` coordinates: IoU,
//! clipping, and greedy per-class NMS.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::labelspace::LabelId;

#[derive(Debug, Clone, PartialEq)]
pub enum BoxError {
    NonFiniteCoordinate,
    /// min coordinate exceeds max on an axis
    InvertedAxis,
    CoordinateOutOfRange(f64),
    InvalidScore(f64),
    /// NMS input mixes more than one image id.
    MixedImage,
    /// NMS input mixes more than one label.
    MixedLabel,
    InvalidNmsThreshold(f64),
}

impl fmt::Display for BoxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoxError::NonFiniteCoordinate => write!(f, "non-finite box coordinate"),
            BoxError::InvertedAxis => write!(f, "box min coordinate exceeds max"),
            BoxError::CoordinateOutOfRange(v) => {
                write!(f, "box coordinate {v} outside [0, 1]")
            }
            BoxError::InvalidScore(s) => write!(f, "score {s} outside [0, 1]"),
            BoxError::MixedImage => write!(f, "nms input mixes image ids"),
            BoxError::MixedLabel => write!(f, "nms input mixes labels"),
            BoxError::InvalidNmsThreshold(t) => {
                write!(f, "nms threshold {t} outside (0, 1)")
            }
        }
    }
}

/// Axis-aligned box, `x_min <= x_max`, `y_min <= y_max`, all in `[0,1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, BoxError> {
        for v in [x_min, y_min, x_max, y_max] {
            if !v.is_finite() {
                return Err(BoxError::NonFiniteCoordinate);
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(BoxError::CoordinateOutOfRange(v));
            }
        }
        if x_min > x_max || y_min > y_max {
            return Err(BoxError::InvertedAxis);
        }
        Ok(BBox {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
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

    /// Corners in (x, y) order: top-left, top-right, bottom-left, bottom-right.
    pub fn corners(&self) -> [(f64, f64); 4] {
        [
            (self.x_min, self.y_min),
            (self.x_max, self.y_min),
            (self.x_min, self.y_max),
            (self.x_max, self.y_max),
        ]
    }

    /// Total-order key over the exact coordinate bit patterns. Coordinates are
    /// non-negative, so the IEEE bit order matches numeric order.
    pub fn bits_key(&self) -> [u64; 4] {
        [
            self.x_min.to_bits(),
            self.y_min.to_bits(),
            self.x_max.to_bits(),
            self.y_max.to_bits(),
        ]
    }

    /// Coordinates rounded to 6 decimals as integers; the join key used by
    /// file round-trips and classifier score lookups.
    pub fn rounded_key(&self) -> [i64; 4] {
        let r = |v: f64| libm::round(v * 1e6) as i64;
        [r(self.x_min), r(self.y_min), r(self.x_max), r(self.y_max)]
    }
}

/// Intersection-over-union of two boxes. Returns 0 when the union has zero
/// area (both boxes degenerate), avoiding the division singularity.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let ix = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let iy = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Clamps raw (possibly out-of-range) coordinates to `[0,1]`. Returns
/// `Ok(None)` when the clamped box has zero width or height; callers drop
/// such boxes. Coordinates must be ordered (`x_min <= x_max`, `y_min <= y_max`)
/// and non-NaN.
pub fn clip_box(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Option<BBox>, BoxError> {
    for v in [x_min, y_min, x_max, y_max] {
        if v.is_nan() {
            return Err(BoxError::NonFiniteCoordinate);
        }
    }
    if x_min > x_max || y_min > y_max {
        return Err(BoxError::InvertedAxis);
    }
    let c = |v: f64| v.clamp(0.0, 1.0);
    let (x0, y0, x1, y1) = (c(x_min), c(y_min), c(x_max), c(y_max));
    if x1 - x0 <= 0.0 || y1 - y0 <= 0.0 {
        return Ok(None);
    }
    Ok(Some(BBox {
        x_min: x0,
        y_min: y0,
        x_max: x1,
        y_max: y1,
    }))
}

/// One predicted box with a confidence score in `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub image_id: String,
    pub label: LabelId,
    pub score: f64,
    pub bbox: BBox,
}

impl Detection {
    pub fn new(
        image_id: impl Into<String>,
        label: LabelId,
        score: f64,
        bbox: BBox,
    ) -> Result<Self, BoxError> {
        if !score.is_finite() || !(0.0..=1.0).contains(&score) {
            return Err(BoxError::InvalidScore(score));
        }
        Ok(Detection {
            image_id: image_id.into(),
            label,
            score,
            bbox,
        })
    }
}

/// One annotated box.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthBox {
    pub image_id: String,
    pub label: LabelId,
    pub bbox: BBox,
}

/// Greedy NMS over detections that share one image and one label.
///
/// Detections are visited in descending score (ties broken by box
/// coordinates, then input order, so the result is deterministic). A
/// detection is kept iff its IoU with every already-kept detection is at
/// most `threshold`. The output is in visit order, i.e. score-descending.
pub fn nms(dets: &[Detection], threshold: f64) -> Result<Vec<Detection>, BoxError> {
    if !threshold.is_finite() || threshold <= 0.0 || threshold >= 1.0 {
        return Err(BoxError::InvalidNmsThreshold(threshold));
    }
    if let Some(first) = dets.first() {
        if dets.iter().any(|d| d.image_id != first.image_id) {
            return Err(BoxError::MixedImage);
        }
        if dets.iter().any(|d| d.label != first.label) {
            return Err(BoxError::MixedLabel);
        }
    }
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .total_cmp(&dets[a].score)
            .then_with(|| dets[a].bbox.bits_key().cmp(&dets[b].bbox.bits_key()))
            .then_with(|| a.cmp(&b))
    });
    let mut kept: Vec<Detection> = Vec::new();
    for idx in order {
        let candidate = &dets[idx];
        if kept
            .iter()
            .all(|k| iou(&k.bbox, &candidate.bbox) <= threshold)
        {
            kept.push(candidate.clone());
        }
    }
    Ok(kept)
}
