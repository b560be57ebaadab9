//! Coordinate conventions shared by every other module: pixel-space boxes,
//! the integer `[0, 1000)` output grid, IoU, and crop-local remapping.
//!
//! Pixel boxes live in the source image's coordinate system as floats.
//! Structured output uses [`NormBox`]: integer corners on a unitless grid
//! where both axes span `[0, 1000)` regardless of the image's aspect ratio.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exclusive upper bound of the structured coordinate grid.
pub const GRID: i64 = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("box has empty extent on the {0} axis")]
    EmptyExtent(&'static str),
    #[error("coordinate {0} is not finite")]
    NonFinite(f64),
    #[error("coordinate {0} outside the [0, {GRID}) grid")]
    OutsideGrid(i64),
    #[error("pixel box extends outside its image")]
    OutsideImage,
    #[error("pixel box is not fully inside the crop region")]
    OutsideCrop,
    #[error("box collapses to zero extent under grid rounding")]
    CollapsedUnderRounding,
    #[error("image dimensions must be at least 1x1")]
    EmptyImage,
    #[error("crop region extends outside its parent image")]
    CropOutsideParent,
}

/// Rounds to the nearest integer, with exact halves rounding up.
///
/// This is the single rounding rule used for every pixel-to-grid
/// conversion, so serialized coordinates are reproducible.
pub fn round_half_up(v: f64) -> i64 {
    (v + 0.5).floor() as i64
}

/// Axis-aligned box on the integer `[0, 1000)` output grid.
///
/// Invariants are enforced at construction (and through serde): all four
/// corners lie in `[0, 1000)` and the rectangle is non-degenerate
/// (`x2 > x1`, `y2 > y1`). Serializes as `[x1, y1, x2, y2]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[i64; 4]", into = "[i64; 4]")]
pub struct NormBox {
    x1: i64,
    y1: i64,
    x2: i64,
    y2: i64,
}

impl NormBox {
    pub fn new(x1: i64, y1: i64, x2: i64, y2: i64) -> Result<Self, GeometryError> {
        for v in [x1, y1, x2, y2] {
            if !(0..GRID).contains(&v) {
                return Err(GeometryError::OutsideGrid(v));
            }
        }
        if x2 <= x1 {
            return Err(GeometryError::EmptyExtent("x"));
        }
        if y2 <= y1 {
            return Err(GeometryError::EmptyExtent("y"));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn x1(&self) -> i64 {
        self.x1
    }

    pub fn y1(&self) -> i64 {
        self.y1
    }

    pub fn x2(&self) -> i64 {
        self.x2
    }

    pub fn y2(&self) -> i64 {
        self.y2
    }

    pub fn width(&self) -> i64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> i64 {
        self.y2 - self.y1
    }

    /// Area treating the grid coordinates as continuous extents.
    pub fn area(&self) -> i64 {
        self.width() * self.height()
    }

    pub fn as_array(&self) -> [i64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }
}

impl TryFrom<[i64; 4]> for NormBox {
    type Error = GeometryError;

    fn try_from(v: [i64; 4]) -> Result<Self, Self::Error> {
        NormBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<NormBox> for [i64; 4] {
    fn from(b: NormBox) -> Self {
        b.as_array()
    }
}

/// Intersection over union of two grid boxes.
///
/// Symmetric, in `[0, 1]`; exactly `1.0` iff the boxes are identical and
/// `0.0` iff their interiors are disjoint. Degenerate inputs cannot occur:
/// [`NormBox`] construction rejects them.
pub fn iou(a: &NormBox, b: &NormBox) -> f64 {
    let ix = a.x2.min(b.x2) - a.x1.max(b.x1);
    let iy = a.y2.min(b.y2) - a.y1.max(b.y1);
    if ix <= 0 || iy <= 0 {
        return 0.0;
    }
    let inter = (ix * iy) as f64;
    let union = (a.area() + b.area()) as f64 - inter;
    inter / union
}

/// Why a raw 4-tuple is not a valid grid box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxViolation {
    /// A coordinate has a fractional part (or is not finite).
    NonIntegral,
    /// A coordinate falls outside `[0, 1000)`.
    OutOfRange,
    /// `x2 <= x1` or `y2 <= y1`.
    EmptyExtent,
}

/// Verdict-returning validation of raw coordinate values.
///
/// Accepts exactly the tuples that are integral, inside the half-open
/// `[0, 1000)` range, and strictly ordered on both axes. All failed checks
/// are reported, each at most once, in the order listed on [`BoxViolation`].
pub fn check_box(raw: [f64; 4]) -> Result<NormBox, Vec<BoxViolation>> {
    let mut violations = Vec::new();
    if raw.iter().any(|v| !v.is_finite() || v.fract() != 0.0) {
        violations.push(BoxViolation::NonIntegral);
    }
    if raw
        .iter()
        .any(|&v| !v.is_finite() || v < 0.0 || v >= GRID as f64)
    {
        violations.push(BoxViolation::OutOfRange);
    }
    if raw[2] <= raw[0] || raw[3] <= raw[1] {
        violations.push(BoxViolation::EmptyExtent);
    }
    if !violations.is_empty() {
        return Err(violations);
    }
    Ok(NormBox::new(
        raw[0] as i64,
        raw[1] as i64,
        raw[2] as i64,
        raw[3] as i64,
    )
    .expect("checked above"))
}

/// Axis-aligned box in source-image pixels. Serializes as `[x1, y1, x2, y2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct PixelBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl PixelBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, GeometryError> {
        for v in [x1, y1, x2, y2] {
            if !v.is_finite() {
                return Err(GeometryError::NonFinite(v));
            }
        }
        if x2 <= x1 {
            return Err(GeometryError::EmptyExtent("x"));
        }
        if y2 <= y1 {
            return Err(GeometryError::EmptyExtent("y"));
        }
        Ok(Self { x1, y1, x2, y2 })
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

    pub fn as_array(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    /// Translates by `(-dx, -dy)`; the caller guarantees the result stays ordered.
    fn shifted(&self, dx: f64, dy: f64) -> Self {
        Self {
            x1: self.x1 - dx,
            y1: self.y1 - dy,
            x2: self.x2 - dx,
            y2: self.y2 - dy,
        }
    }
}

impl TryFrom<[f64; 4]> for PixelBox {
    type Error = GeometryError;

    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        PixelBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<PixelBox> for [f64; 4] {
    fn from(b: PixelBox) -> Self {
        b.as_array()
    }
}

/// Width and height of an image in pixels, both at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawDims")]
pub struct ImageDims {
    pub width: u32,
    pub height: u32,
}

#[derive(Deserialize)]
struct RawDims {
    width: u32,
    height: u32,
}

impl TryFrom<RawDims> for ImageDims {
    type Error = GeometryError;

    fn try_from(raw: RawDims) -> Result<Self, Self::Error> {
        ImageDims::new(raw.width, raw.height)
    }
}

impl ImageDims {
    pub fn new(width: u32, height: u32) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::EmptyImage);
        }
        Ok(Self { width, height })
    }

    pub fn min_edge(&self) -> u32 {
        self.width.min(self.height)
    }

    /// True when the pixel box lies within `[0, width] x [0, height]`.
    pub fn contains(&self, p: &PixelBox) -> bool {
        p.x1 >= 0.0 && p.y1 >= 0.0 && p.x2 <= self.width as f64 && p.y2 <= self.height as f64
    }
}

/// Scales a pixel box onto the `[0, 1000)` grid of its image.
///
/// Each coordinate is multiplied by `1000 / width` (x) or `1000 / height`
/// (y), rounded half-up, then clamped to 999 so the half-open range holds.
/// Boxes whose extent vanishes under rounding are rejected rather than
/// widened.
pub fn normalize_box(p: &PixelBox, dims: ImageDims) -> Result<NormBox, GeometryError> {
    if !dims.contains(p) {
        return Err(GeometryError::OutsideImage);
    }
    let sx = GRID as f64 / dims.width as f64;
    let sy = GRID as f64 / dims.height as f64;
    let clamp = |v: i64| v.min(GRID - 1);
    let x1 = clamp(round_half_up(p.x1 * sx));
    let y1 = clamp(round_half_up(p.y1 * sy));
    let x2 = clamp(round_half_up(p.x2 * sx));
    let y2 = clamp(round_half_up(p.y2 * sy));
    if x2 <= x1 || y2 <= y1 {
        return Err(GeometryError::CollapsedUnderRounding);
    }
    NormBox::new(x1, y1, x2, y2)
}

/// Recovers pixel coordinates from a grid box (inverse of [`normalize_box`]
/// up to rounding).
pub fn denormalize_box(b: &NormBox, dims: ImageDims) -> PixelBox {
    let sx = dims.width as f64 / GRID as f64;
    let sy = dims.height as f64 / GRID as f64;
    PixelBox::new(
        b.x1 as f64 * sx,
        b.y1 as f64 * sy,
        b.x2 as f64 * sx,
        b.y2 as f64 * sy,
    )
    .expect("scaling preserves ordering")
}

/// Axis-aligned sub-region of a parent image, in integer pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawCrop")]
pub struct CropRegion {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
    pub parent: ImageDims,
}

#[derive(Deserialize)]
struct RawCrop {
    x: u32,
    y: u32,
    width: u32,
    height: u32,
    parent: ImageDims,
}

impl TryFrom<RawCrop> for CropRegion {
    type Error = GeometryError;

    fn try_from(raw: RawCrop) -> Result<Self, Self::Error> {
        CropRegion::new(raw.x, raw.y, raw.width, raw.height, raw.parent)
    }
}

impl CropRegion {
    pub fn new(
        x: u32,
        y: u32,
        width: u32,
        height: u32,
        parent: ImageDims,
    ) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::EmptyImage);
        }
        if x as u64 + width as u64 > parent.width as u64
            || y as u64 + height as u64 > parent.height as u64
        {
            return Err(GeometryError::CropOutsideParent);
        }
        Ok(Self {
            x,
            y,
            width,
            height,
            parent,
        })
    }

    pub fn dims(&self) -> ImageDims {
        ImageDims::new(self.width, self.height).expect("crop sides are nonzero")
    }

    pub fn area(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    /// True when the pixel box (in parent coordinates) lies fully inside.
    pub fn contains(&self, p: &PixelBox) -> bool {
        p.x1 >= self.x as f64
            && p.y1 >= self.y as f64
            && p.x2 <= (self.x + self.width) as f64
            && p.y2 <= (self.y + self.height) as f64
    }

    /// Maps a crop-local grid box back to parent-image pixels.
    pub fn to_parent_px(&self, b: &NormBox) -> PixelBox {
        let local = denormalize_box(b, self.dims());
        PixelBox::new(
            self.x as f64 + local.x1,
            self.y as f64 + local.y1,
            self.x as f64 + local.x2,
            self.y as f64 + local.y2,
        )
        .expect("translation preserves ordering")
    }
}

/// Maps a pixel box into the crop-local `[0, 1000)` grid.
///
/// The box must be fully visible inside the crop; the result covers the
/// same pixels expressed in the crop's own coordinate system.
pub fn remap_box(p: &PixelBox, crop: &CropRegion) -> Result<NormBox, GeometryError> {
    if !crop.contains(p) {
        return Err(GeometryError::OutsideCrop);
    }
    let local = p.shifted(crop.x as f64, crop.y as f64);
    normalize_box(&local, crop.dims())
}
