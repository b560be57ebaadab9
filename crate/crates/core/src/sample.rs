//! Serialized schema of synthesized multi-image training samples
//! (`sample/v1` lines), shared by both synthesis branches, mixing, and
//! scoring.

use crate::geometry::{CropRegion, ImageDims, NormBox, PixelBox};
use crate::template::Branch;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error("sample {id}: target {ordinal} has image index {img_idx} but only {slots} slots")]
    TargetIndexOutOfRange {
        id: String,
        ordinal: usize,
        img_idx: usize,
        slots: usize,
    },
    #[error("sample {0}: no image slots")]
    NoSlots(String),
    #[error("sample {0}: no ground-truth targets")]
    NoTargets(String),
    #[error("sample {id}: geometry record invalid: {detail}")]
    BadGeometry { id: String, detail: String },
}

/// One (image index, label, box) entry; used both for ground truth and for
/// validated predictions. Field names match the structured answer format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetTuple {
    pub img_idx: usize,
    pub label: String,
    pub bbox_2d: NormBox,
}

/// Which view of the source image a slot shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewKind {
    Original,
    Focus,
    Context,
}

impl std::fmt::Display for ViewKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ViewKind::Original => write!(f, "original"),
            ViewKind::Focus => write!(f, "focus"),
            ViewKind::Context => write!(f, "context"),
        }
    }
}

/// One position of the ordered multi-image input.
///
/// `dims` are the dimensions of what the model sees in this slot: the
/// source image for plain slots, the crop for cropped views.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSlot {
    pub instance: u64,
    pub image: String,
    #[serde(flatten)]
    pub dims: ImageDims,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub view: Option<ViewKind>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub crop: Option<CropRegion>,
}

/// Seed bookkeeping so any sample can be regenerated in isolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngTrace {
    pub master: u64,
    pub stream: u64,
}

/// One synthesized view and how it was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewSpec {
    pub kind: ViewKind,
    /// Slot position of this view after shuffling.
    pub slot: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub crop: Option<CropRegion>,
    /// The target box in this view's own grid coordinates.
    pub bbox_2d: NormBox,
}

/// Crop geometry attached to every intra-branch sample (`geometry/v1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntraSampleGeometry {
    #[serde(with = "crate::io::geometry_v1")]
    pub schema: (),
    pub instance: u64,
    pub label: String,
    pub pixel_box: PixelBox,
    pub views: Vec<ViewSpec>,
}

/// One synthesized training instance (`sample/v1` line).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiImageSample {
    #[serde(with = "crate::io::sample_v1")]
    pub schema: (),
    pub id: String,
    pub branch: Branch,
    pub rng: RngTrace,
    pub template: String,
    pub query: String,
    pub slots: Vec<ImageSlot>,
    pub targets: Vec<TargetTuple>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub geometry: Option<IntraSampleGeometry>,
}

impl MultiImageSample {
    /// Structural invariants checked when loading samples from disk.
    pub fn validate(&self) -> Result<(), SampleError> {
        if self.slots.is_empty() {
            return Err(SampleError::NoSlots(self.id.clone()));
        }
        if self.targets.is_empty() {
            return Err(SampleError::NoTargets(self.id.clone()));
        }
        for (ordinal, t) in self.targets.iter().enumerate() {
            if t.img_idx >= self.slots.len() {
                return Err(SampleError::TargetIndexOutOfRange {
                    id: self.id.clone(),
                    ordinal,
                    img_idx: t.img_idx,
                    slots: self.slots.len(),
                });
            }
        }
        if let Some(geom) = &self.geometry {
            self.validate_geometry(geom)?;
        }
        Ok(())
    }

    fn validate_geometry(&self, geom: &IntraSampleGeometry) -> Result<(), SampleError> {
        let bad = |detail: String| SampleError::BadGeometry {
            id: self.id.clone(),
            detail,
        };
        for kind in [ViewKind::Original, ViewKind::Focus, ViewKind::Context] {
            let hits = geom.views.iter().filter(|v| v.kind == kind).count();
            if hits != 1 {
                return Err(bad(format!("{hits} views of kind {kind}")));
            }
        }
        let mut areas = [0u64; 3];
        for view in &geom.views {
            if view.slot >= self.slots.len()
                || self.slots[view.slot].view != Some(view.kind)
            {
                return Err(bad(format!("view {} not bound to its slot", view.kind)));
            }
            let band = match view.kind {
                ViewKind::Original => None,
                ViewKind::Focus => Some((1.2, 1.5)),
                ViewKind::Context => Some((1.8, 2.5)),
            };
            match (band, view.ratio, &view.crop) {
                (None, None, None) => {}
                (Some((lo, hi)), Some(r), Some(crop)) => {
                    if !(lo..=hi).contains(&r) {
                        return Err(bad(format!("{} ratio {r} outside [{lo}, {hi}]", view.kind)));
                    }
                    if !crop.contains(&geom.pixel_box) {
                        return Err(bad(format!("target not visible in the {} crop", view.kind)));
                    }
                    match view.kind {
                        ViewKind::Focus => areas[1] = crop.area(),
                        ViewKind::Context => areas[2] = crop.area(),
                        ViewKind::Original => unreachable!(),
                    }
                }
                _ => return Err(bad(format!("{} view has inconsistent crop fields", view.kind))),
            }
        }
        if areas[2] <= areas[1] {
            return Err(bad("context crop area not larger than focus".into()));
        }
        Ok(())
    }
}
