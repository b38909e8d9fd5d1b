//! Auto-augmentation policy engine: probability-gated operations at integer
//! magnitudes, applied to an 8-bit RGB raster and its boxes.
//!
//! A policy is a list of sub-policies, each an ordered pair of operations;
//! applying a policy draws one sub-policy uniformly and runs its two
//! operations in order. Geometric operations move pixels and box corners by
//! the same affine map (boxes are re-bounded, clipped, and dropped when
//! fully ejected); pixel-only operations never touch box coordinates.
//!
//! The magnitude scale M in 0..=10 maps linearly per kind: translation up to
//! 0.3 of the image dimension, shear factor up to 0.3, rotation up to 30
//! degrees, cutout side up to 0.5 of the smaller dimension, and an
//! enhancement delta up to 0.9 (applied as factor `1 ± delta`, so M = 0 is
//! the identity and M = 10 reaches the 0.1 / 1.9 extremes). Directional and
//! enhancement signs are drawn per application. Exposed pixels fill with
//! gray (128, 128, 128).

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::boxes::{clip_box, BBox, BoxError};

#[derive(Debug, Clone, PartialEq)]
pub enum AugmentError {
    InvalidProbability(f64),
    /// Magnitude above 10.
    InvalidMagnitude(u8),
    EmptyPolicy,
    ZeroDimension,
    PixelBufferMismatch {
        expected: usize,
        got: usize,
    },
    UnknownKind(String),
    /// Operation has no box-moving affine map.
    NotGeometric(AugOpKind),
    Box(BoxError),
}

impl fmt::Display for AugmentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AugmentError::InvalidProbability(p) => write!(f, "probability {p} outside [0, 1]"),
            AugmentError::InvalidMagnitude(m) => write!(f, "magnitude {m} above 10"),
            AugmentError::EmptyPolicy => write!(f, "policy needs at least one sub-policy"),
            AugmentError::ZeroDimension => write!(f, "image dimensions must be at least 1"),
            AugmentError::PixelBufferMismatch { expected, got } => {
                write!(f, "pixel buffer holds {got} bytes, expected {expected}")
            }
            AugmentError::UnknownKind(s) => write!(f, "unknown augmentation kind {s:?}"),
            AugmentError::NotGeometric(kind) => {
                write!(f, "{} has no box-moving affine map", kind.as_str())
            }
            AugmentError::Box(e) => write!(f, "{e}"),
        }
    }
}

impl From<BoxError> for AugmentError {
    fn from(e: BoxError) -> Self {
        AugmentError::Box(e)
    }
}

/// The nine operations of the augmentation table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugOpKind {
    TranslateXBBox,
    TranslateYOnlyBBoxes,
    Equalize,
    Cutout,
    Sharpness,
    ShearXBBox,
    ShearYBBox,
    RotateBBox,
    Color,
}

impl AugOpKind {
    pub const ALL: [AugOpKind; 9] = [
        AugOpKind::TranslateXBBox,
        AugOpKind::TranslateYOnlyBBoxes,
        AugOpKind::Equalize,
        AugOpKind::Cutout,
        AugOpKind::Sharpness,
        AugOpKind::ShearXBBox,
        AugOpKind::ShearYBBox,
        AugOpKind::RotateBBox,
        AugOpKind::Color,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AugOpKind::TranslateXBBox => "TranslateX_BBox",
            AugOpKind::TranslateYOnlyBBoxes => "TranslateY_Only_BBoxes",
            AugOpKind::Equalize => "Equalize",
            AugOpKind::Cutout => "Cutout",
            AugOpKind::Sharpness => "Sharpness",
            AugOpKind::ShearXBBox => "ShearX_BBox",
            AugOpKind::ShearYBBox => "ShearY_BBox",
            AugOpKind::RotateBBox => "Rotate_BBox",
            AugOpKind::Color => "Color",
        }
    }

    /// Operations whose affine map moves box corners along with the pixels.
    pub fn is_geometric(&self) -> bool {
        matches!(
            self,
            AugOpKind::TranslateXBBox
                | AugOpKind::ShearXBBox
                | AugOpKind::ShearYBBox
                | AugOpKind::RotateBBox
        )
    }
}

impl core::str::FromStr for AugOpKind {
    type Err = AugmentError;

    fn from_str(s: &str) -> Result<Self, AugmentError> {
        Self::ALL
            .iter()
            .copied()
            .find(|kind| kind.as_str() == s)
            .ok_or_else(|| AugmentError::UnknownKind(String::from(s)))
    }
}

/// One gated operation: apply `kind` at magnitude `magnitude` with
/// probability `probability`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugOp {
    pub kind: AugOpKind,
    pub probability: f64,
    pub magnitude: u8,
}

impl AugOp {
    pub fn new(kind: AugOpKind, probability: f64, magnitude: u8) -> Result<Self, AugmentError> {
        if !probability.is_finite() || !(0.0..=1.0).contains(&probability) {
            return Err(AugmentError::InvalidProbability(probability));
        }
        if magnitude > 10 {
            return Err(AugmentError::InvalidMagnitude(magnitude));
        }
        Ok(AugOp {
            kind,
            probability,
            magnitude,
        })
    }
}

/// Ordered list of two-operation sub-policies.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    sub_policies: Vec<[AugOp; 2]>,
}

impl Policy {
    pub fn new(sub_policies: Vec<[AugOp; 2]>) -> Result<Self, AugmentError> {
        if sub_policies.is_empty() {
            return Err(AugmentError::EmptyPolicy);
        }
        Ok(Policy { sub_policies })
    }

    pub fn sub_policies(&self) -> &[[AugOp; 2]] {
        &self.sub_policies
    }
}

/// The five-sub-policy table used for detection training.
pub fn default_policy() -> Policy {
    let op = |kind, p, m| AugOp {
        kind,
        probability: p,
        magnitude: m,
    };
    Policy {
        sub_policies: alloc::vec![
            [
                op(AugOpKind::TranslateXBBox, 0.6, 4),
                op(AugOpKind::Equalize, 0.8, 10)
            ],
            [
                op(AugOpKind::TranslateYOnlyBBoxes, 0.2, 2),
                op(AugOpKind::Cutout, 0.8, 8)
            ],
            [
                op(AugOpKind::Sharpness, 0.0, 8),
                op(AugOpKind::ShearXBBox, 0.4, 0)
            ],
            [
                op(AugOpKind::ShearYBBox, 1.0, 2),
                op(AugOpKind::TranslateYOnlyBBoxes, 0.6, 6)
            ],
            [
                op(AugOpKind::RotateBBox, 0.6, 10),
                op(AugOpKind::Color, 1.0, 6)
            ],
        ],
    }
}

/// Linear magnitude-to-strength mapping, identity at M = 0. Units per kind:
/// image-dimension fraction for translations, shear factor, degrees for
/// rotation, min-dimension fraction for the cutout side, enhancement delta
/// for Sharpness/Color (factor is `1 ± delta`). Equalize ignores M.
pub fn magnitude_to_param(kind: AugOpKind, magnitude: u8) -> Result<f64, AugmentError> {
    if magnitude > 10 {
        return Err(AugmentError::InvalidMagnitude(magnitude));
    }
    let unit = magnitude as f64 / 10.0;
    Ok(match kind {
        AugOpKind::TranslateXBBox | AugOpKind::TranslateYOnlyBBoxes => 0.3 * unit,
        AugOpKind::ShearXBBox | AugOpKind::ShearYBBox => 0.3 * unit,
        AugOpKind::RotateBBox => 30.0 * unit,
        AugOpKind::Cutout => 0.5 * unit,
        AugOpKind::Sharpness | AugOpKind::Color => 0.9 * unit,
        AugOpKind::Equalize => 0.0,
    })
}

const GRAY: [u8; 3] = [128, 128, 128];

/// 8-bit RGB raster, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, AugmentError> {
        if width == 0 || height == 0 {
            return Err(AugmentError::ZeroDimension);
        }
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(AugmentError::PixelBufferMismatch {
                expected,
                got: pixels.len(),
            });
        }
        Ok(RasterImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self, AugmentError> {
        if width == 0 || height == 0 {
            return Err(AugmentError::ZeroDimension);
        }
        let mut pixels = Vec::with_capacity(width as usize * height as usize * 3);
        for _ in 0..(width as usize * height as usize) {
            pixels.extend_from_slice(&rgb);
        }
        Ok(RasterImage {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }
}

/// Forward affine map over continuous pixel coordinates:
/// `x' = a x + b y + c`, `y' = d x + e y + f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub coeffs: [f64; 6],
}

impl Affine {
    pub fn translate(dx: f64, dy: f64) -> Self {
        Affine {
            coeffs: [1.0, 0.0, dx, 0.0, 1.0, dy],
        }
    }

    pub fn shear_x(s: f64) -> Self {
        Affine {
            coeffs: [1.0, s, 0.0, 0.0, 1.0, 0.0],
        }
    }

    pub fn shear_y(s: f64) -> Self {
        Affine {
            coeffs: [1.0, 0.0, 0.0, s, 1.0, 0.0],
        }
    }

    pub fn rotate_about(cx: f64, cy: f64, radians: f64) -> Self {
        let cos = libm::cos(radians);
        let sin = libm::sin(radians);
        Affine {
            coeffs: [
                cos,
                -sin,
                cx - cos * cx + sin * cy,
                sin,
                cos,
                cy - sin * cx - cos * cy,
            ],
        }
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let [a, b, c, d, e, f] = self.coeffs;
        (a * x + b * y + c, d * x + e * y + f)
    }

    /// Inverse map; the bundled transforms are all invertible.
    pub fn inverse(&self) -> Affine {
        let [a, b, c, d, e, f] = self.coeffs;
        let det = a * e - b * d;
        Affine {
            coeffs: [
                e / det,
                -b / det,
                (b * f - e * c) / det,
                -d / det,
                a / det,
                (d * c - a * f) / det,
            ],
        }
    }
}

/// The affine map an operation applies at a signed strength, in pixel space.
pub fn geometric_affine(
    kind: AugOpKind,
    signed_param: f64,
    width: u32,
    height: u32,
) -> Result<Affine, AugmentError> {
    let w = width as f64;
    let h = height as f64;
    Ok(match kind {
        AugOpKind::TranslateXBBox => Affine::translate(signed_param * w, 0.0),
        AugOpKind::ShearXBBox => Affine::shear_x(signed_param),
        AugOpKind::ShearYBBox => Affine::shear_y(signed_param),
        AugOpKind::RotateBBox => Affine::rotate_about(
            w / 2.0,
            h / 2.0,
            signed_param * core::f64::consts::PI / 180.0,
        ),
        other => return Err(AugmentError::NotGeometric(other)),
    })
}

/// Maps a normalized box through a pixel-space affine: corners to pixel
/// space, through the map, re-bounded axis-aligned, back to normalized, then
/// clipped. `None` when the result is fully ejected.
pub fn transform_box(
    bbox: &BBox,
    affine: &Affine,
    width: u32,
    height: u32,
) -> Result<Option<BBox>, AugmentError> {
    let w = width as f64;
    let h = height as f64;
    let mut x_min = f64::INFINITY;
    let mut y_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for (cx, cy) in bbox.corners() {
        let (px, py) = affine.apply(cx * w, cy * h);
        x_min = x_min.min(px / w);
        y_min = y_min.min(py / h);
        x_max = x_max.max(px / w);
        y_max = y_max.max(py / h);
    }
    Ok(clip_box(x_min, y_min, x_max, y_max)?)
}

/// Resamples the raster through the inverse affine (nearest neighbor);
/// pixels that map outside the source fill with gray.
fn warp_pixels(img: &RasterImage, affine: &Affine) -> RasterImage {
    let inverse = affine.inverse();
    let mut out = img.clone();
    for y in 0..img.height {
        for x in 0..img.width {
            let (sx, sy) = inverse.apply(x as f64 + 0.5, y as f64 + 0.5);
            let xi = libm::floor(sx);
            let yi = libm::floor(sy);
            let rgb =
                if xi >= 0.0 && yi >= 0.0 && (xi as u32) < img.width && (yi as u32) < img.height {
                    img.pixel(xi as u32, yi as u32)
                } else {
                    GRAY
                };
            out.set_pixel(x, y, rgb);
        }
    }
    out
}

/// Applies a geometric operation at a signed strength: pixels through the
/// affine, every box through [`transform_box`], ejected boxes dropped.
pub fn apply_geometric(
    img: &RasterImage,
    boxes: &[BBox],
    kind: AugOpKind,
    signed_param: f64,
) -> Result<(RasterImage, Vec<BBox>), AugmentError> {
    let affine = geometric_affine(kind, signed_param, img.width, img.height)?;
    let out_img = warp_pixels(img, &affine);
    let mut out_boxes = Vec::with_capacity(boxes.len());
    for bbox in boxes {
        if let Some(moved) = transform_box(bbox, &affine, img.width, img.height)? {
            out_boxes.push(moved);
        }
    }
    Ok((out_img, out_boxes))
}

/// Per-channel histogram equalization. Single-valued channels are left
/// unchanged (the remap denominator would be zero).
fn equalize(img: &RasterImage) -> RasterImage {
    let total = img.width as u64 * img.height as u64;
    let mut out = img.clone();
    for channel in 0..3 {
        let mut histogram = [0u64; 256];
        for i in (channel..img.pixels.len()).step_by(3) {
            histogram[img.pixels[i] as usize] += 1;
        }
        let mut cdf = [0u64; 256];
        let mut running = 0u64;
        let mut cdf_min = 0u64;
        let mut seen_first = false;
        for v in 0..256 {
            running += histogram[v];
            cdf[v] = running;
            if !seen_first && histogram[v] > 0 {
                cdf_min = running;
                seen_first = true;
            }
        }
        if total == cdf_min {
            continue;
        }
        let mut lut = [0u8; 256];
        for v in 0..256 {
            // bins below the first occupied value never occur; saturate to 0
            let num = cdf[v].saturating_sub(cdf_min) as f64 * 255.0;
            let den = (total - cdf_min) as f64;
            lut[v] = libm::round(num / den).clamp(0.0, 255.0) as u8;
        }
        for i in (channel..out.pixels.len()).step_by(3) {
            out.pixels[i] = lut[img.pixels[i] as usize];
        }
    }
    out
}

fn blend_u8(base: f64, target: f64, factor: f64) -> u8 {
    libm::round(base + factor * (target - base)).clamp(0.0, 255.0) as u8
}

/// Sharpness enhancement: blend from a 3x3 smoothed copy (factor 0) through
/// the original (factor 1) to an over-sharpened extreme. Border pixels keep
/// their original values.
fn sharpness(img: &RasterImage, factor: f64) -> RasterImage {
    let mut out = img.clone();
    if img.width < 3 || img.height < 3 {
        return out;
    }
    const KERNEL: [[f64; 3]; 3] = [[1.0, 1.0, 1.0], [1.0, 5.0, 1.0], [1.0, 1.0, 1.0]];
    for y in 1..img.height - 1 {
        for x in 1..img.width - 1 {
            let mut smoothed = [0.0f64; 3];
            for (ky, row) in KERNEL.iter().enumerate() {
                for (kx, &weight) in row.iter().enumerate() {
                    let p = img.pixel(x + kx as u32 - 1, y + ky as u32 - 1);
                    for c in 0..3 {
                        smoothed[c] += weight * p[c] as f64;
                    }
                }
            }
            let original = img.pixel(x, y);
            let mut rgb = [0u8; 3];
            for c in 0..3 {
                rgb[c] = blend_u8(smoothed[c] / 13.0, original[c] as f64, factor);
            }
            out.set_pixel(x, y, rgb);
        }
    }
    out
}

/// Color (saturation) enhancement: blend from the luma grayscale (factor 0)
/// through the original (factor 1) to over-saturated.
fn color(img: &RasterImage, factor: f64) -> RasterImage {
    let mut out = img.clone();
    for y in 0..img.height {
        for x in 0..img.width {
            let p = img.pixel(x, y);
            let luma = 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64;
            let rgb = [
                blend_u8(luma, p[0] as f64, factor),
                blend_u8(luma, p[1] as f64, factor),
                blend_u8(luma, p[2] as f64, factor),
            ];
            out.set_pixel(x, y, rgb);
        }
    }
    out
}

/// Gray square of the given side centered at (cx, cy), clipped to the image.
fn cutout(img: &RasterImage, side: u32, cx: u32, cy: u32) -> RasterImage {
    let mut out = img.clone();
    let half = side as i64 / 2;
    let x0 = (cx as i64 - half).max(0);
    let y0 = (cy as i64 - half).max(0);
    let x1 = (cx as i64 - half + side as i64).min(img.width as i64);
    let y1 = (cy as i64 - half + side as i64).min(img.height as i64);
    for y in y0..y1 {
        for x in x0..x1 {
            out.set_pixel(x as u32, y as u32, GRAY);
        }
    }
    out
}

/// Shifts pixel content vertically by `dy` rows inside each box region,
/// leaving coordinates untouched; vacated rows fill with gray. Boxes are
/// processed sequentially, each against the current raster.
fn translate_pixels_in_boxes(img: &RasterImage, boxes: &[BBox], dy: i64) -> RasterImage {
    let mut out = img.clone();
    let w = img.width as f64;
    let h = img.height as f64;
    for bbox in boxes {
        let x0 = libm::floor(bbox.x_min() * w).max(0.0) as u32;
        let x1 = (libm::ceil(bbox.x_max() * w) as u32).min(img.width);
        let y0 = libm::floor(bbox.y_min() * h).max(0.0) as u32;
        let y1 = (libm::ceil(bbox.y_max() * h) as u32).min(img.height);
        if x0 >= x1 || y0 >= y1 {
            continue;
        }
        let snapshot = out.clone();
        for y in y0..y1 {
            let src_y = y as i64 - dy;
            for x in x0..x1 {
                let rgb = if src_y >= y0 as i64 && src_y < y1 as i64 {
                    snapshot.pixel(x, src_y as u32)
                } else {
                    GRAY
                };
                out.set_pixel(x, y, rgb);
            }
        }
    }
    out
}

fn draw_sign(rng: &mut impl Rng) -> f64 {
    if rng.gen::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Applies one gated operation. Draw order per call: the probability gate,
/// then (when firing) the operation's own draws: a direction or enhancement
/// sign, or the cutout center.
pub fn apply_op(
    img: &RasterImage,
    boxes: &[BBox],
    op: &AugOp,
    rng: &mut impl Rng,
) -> Result<(RasterImage, Vec<BBox>), AugmentError> {
    if !op.probability.is_finite() || !(0.0..=1.0).contains(&op.probability) {
        return Err(AugmentError::InvalidProbability(op.probability));
    }
    let param = magnitude_to_param(op.kind, op.magnitude)?;
    let gate: f64 = rng.gen();
    if gate >= op.probability {
        return Ok((img.clone(), boxes.to_vec()));
    }
    match op.kind {
        AugOpKind::TranslateXBBox
        | AugOpKind::ShearXBBox
        | AugOpKind::ShearYBBox
        | AugOpKind::RotateBBox => {
            let signed = draw_sign(rng) * param;
            apply_geometric(img, boxes, op.kind, signed)
        }
        AugOpKind::TranslateYOnlyBBoxes => {
            let dy = draw_sign(rng) * param * img.height as f64;
            let out = translate_pixels_in_boxes(img, boxes, libm::round(dy) as i64);
            Ok((out, boxes.to_vec()))
        }
        AugOpKind::Equalize => Ok((equalize(img), boxes.to_vec())),
        AugOpKind::Cutout => {
            let min_dim = img.width.min(img.height) as f64;
            let side = libm::round(param * min_dim) as u32;
            let cx = rng.gen_range(0..img.width);
            let cy = rng.gen_range(0..img.height);
            Ok((cutout(img, side, cx, cy), boxes.to_vec()))
        }
        AugOpKind::Sharpness | AugOpKind::Color => {
            let factor = 1.0 + draw_sign(rng) * param;
            let out = match op.kind {
                AugOpKind::Sharpness => sharpness(img, factor),
                _ => color(img, factor),
            };
            Ok((out, boxes.to_vec()))
        }
    }
}

/// Applies a policy: one sub-policy drawn uniformly, its two operations run
/// in listed order. Deterministic for a fixed generator state.
pub fn apply_policy(
    img: &RasterImage,
    boxes: &[BBox],
    policy: &Policy,
    rng: &mut impl Rng,
) -> Result<(RasterImage, Vec<BBox>), AugmentError> {
    let choice = rng.gen_range(0..policy.sub_policies.len());
    let [first, second] = &policy.sub_policies[choice];
    let (img, boxes) = apply_op(img, boxes, first, rng)?;
    apply_op(&img, &boxes, second, rng)
}
