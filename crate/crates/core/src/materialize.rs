//! Pixel materialization of synthesized samples.
//!
//! Synthesis emits geometry only; this step extracts the axis-aligned
//! sub-regions from the actual image files, writing one PNG per slot.

use crate::io::{read_jsonl, JsonlError};
use crate::sample::{MultiImageSample, SampleError};
use image::GenericImageView;
use serde::Serialize;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MaterializeError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("samples file: {0}")]
    Jsonl(#[from] JsonlError),
    #[error("sample invalid: {0}")]
    Sample(#[from] SampleError),
    #[error("image {path}: {source}")]
    Image {
        path: String,
        source: image::ImageError,
    },
    #[error("image {path} is {actual_w}x{actual_h} but the sample records {want_w}x{want_h}")]
    DimsMismatch {
        path: String,
        actual_w: u32,
        actual_h: u32,
        want_w: u32,
        want_h: u32,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MaterializeReport {
    pub samples: usize,
    pub images_written: usize,
}

/// Extracts every slot of every sample in `samples_path` into `out_dir`.
///
/// Slot `j` of sample `id` becomes `{id}_slot{j}_{view}.png` (`image` when
/// the slot has no view tag). Source files are resolved against
/// `images_dir`; recorded dimensions must match the actual files.
pub fn materialize(
    samples_path: &Path,
    images_dir: &Path,
    out_dir: &Path,
) -> Result<MaterializeReport, MaterializeError> {
    std::fs::create_dir_all(out_dir)?;
    let samples: Vec<MultiImageSample> = read_jsonl(samples_path)?;
    let mut report = MaterializeReport {
        samples: samples.len(),
        images_written: 0,
    };
    for sample in &samples {
        sample.validate()?;
        for (j, slot) in sample.slots.iter().enumerate() {
            let src = images_dir.join(&slot.image);
            let img = image::open(&src).map_err(|source| MaterializeError::Image {
                path: src.display().to_string(),
                source,
            })?;
            let (actual_w, actual_h) = img.dimensions();
            let out = match &slot.crop {
                Some(crop) => {
                    if (actual_w, actual_h) != (crop.parent.width, crop.parent.height) {
                        return Err(MaterializeError::DimsMismatch {
                            path: src.display().to_string(),
                            actual_w,
                            actual_h,
                            want_w: crop.parent.width,
                            want_h: crop.parent.height,
                        });
                    }
                    img.crop_imm(crop.x, crop.y, crop.width, crop.height)
                }
                None => {
                    if (actual_w, actual_h) != (slot.dims.width, slot.dims.height) {
                        return Err(MaterializeError::DimsMismatch {
                            path: src.display().to_string(),
                            actual_w,
                            actual_h,
                            want_w: slot.dims.width,
                            want_h: slot.dims.height,
                        });
                    }
                    img
                }
            };
            let view = slot
                .view
                .map(|v| v.to_string())
                .unwrap_or_else(|| "image".to_string());
            let name = format!("{}_slot{}_{}.png", sample.id, j, view);
            out.save(out_dir.join(&name))
                .map_err(|source| MaterializeError::Image {
                    path: name,
                    source,
                })?;
            report.images_written += 1;
        }
    }
    Ok(report)
}
