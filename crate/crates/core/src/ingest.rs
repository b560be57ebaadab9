//! Source-annotation ingestion: converts heterogeneous records into the
//! unified grounding pool, applying box validation and the minimum-edge
//! filter.
//!
//! Input records are self-describing JSON lines; the pool is persisted one
//! instance per line under the `pool/v1` schema with normalized boxes as
//! integers and pixel boxes as decimals.

use crate::geometry::{normalize_box, ImageDims, NormBox, PixelBox};
use crate::io::{self, JsonlError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

/// Default minimum edge length in pixels for pool membership.
pub const DEFAULT_MIN_EDGE: u32 = 640;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("input stream unreadable: {0}")]
    Io(#[from] std::io::Error),
    #[error("pool file: {0}")]
    Jsonl(#[from] JsonlError),
    #[error("duplicate instance id {0}")]
    DuplicateId(u64),
    #[error("instance {0} has no annotations")]
    EmptyAnnotations(u64),
}

/// Box layout used by a source annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoxConvention {
    #[serde(rename = "xyxy-pixel")]
    XyxyPixel,
    #[serde(rename = "xywh-pixel")]
    XywhPixel,
}

/// One raw annotation as found in a source record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawAnnotation {
    pub label: String,
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    pub convention: BoxConvention,
}

/// One source-dataset record, prior to unification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceRecord {
    pub dataset: String,
    pub image: String,
    #[serde(flatten)]
    pub dims: ImageDims,
    pub annotations: Vec<RawAnnotation>,
}

/// A unified annotation: label plus the box in both coordinate systems.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Annotation {
    pub label: String,
    pub pixel_box: PixelBox,
    pub norm_box: NormBox,
}

/// One unified image entry of the grounding pool (`pool/v1` line).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundingInstance {
    #[serde(with = "crate::io::pool_v1")]
    pub schema: (),
    pub id: u64,
    pub dataset: String,
    pub image: String,
    #[serde(flatten)]
    pub dims: ImageDims,
    pub annotations: Vec<Annotation>,
}

impl GroundingInstance {
    /// Distinct normalized labels in first-occurrence order.
    pub fn distinct_labels(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for ann in &self.annotations {
            let norm = normalize_label(&ann.label);
            if !seen.contains(&norm) {
                seen.push(norm);
            }
        }
        seen
    }
}

/// Canonical label form used for all label comparisons: Unicode NFC
/// followed by case folding via `to_lowercase`, with surrounding
/// whitespace trimmed.
pub fn normalize_label(label: &str) -> String {
    label.trim().nfc().collect::<String>().to_lowercase()
}

/// Why [`unify_record`] rejected a record outright.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnifyRejection {
    #[error("no valid annotations survived unification")]
    NoValidAnnotations,
}

/// Result of unifying one record: the instance plus annotation drop count.
#[derive(Debug, Clone)]
pub struct UnifiedRecord {
    pub instance: GroundingInstance,
    pub dropped_annotations: usize,
}

/// Converts a source record into a unified instance.
///
/// Boxes are converted to xyxy pixels and normalized onto the output grid;
/// annotations that are degenerate, fall outside the image, or collapse
/// under rounding are dropped. The record is rejected when nothing
/// survives.
pub fn unify_record(record: &SourceRecord, id: u64) -> Result<UnifiedRecord, UnifyRejection> {
    let mut annotations = Vec::new();
    let mut dropped = 0usize;
    for raw in &record.annotations {
        let xyxy = match raw.convention {
            BoxConvention::XyxyPixel => raw.bbox,
            BoxConvention::XywhPixel => [
                raw.bbox[0],
                raw.bbox[1],
                raw.bbox[0] + raw.bbox[2],
                raw.bbox[1] + raw.bbox[3],
            ],
        };
        let pixel_box = match PixelBox::new(xyxy[0], xyxy[1], xyxy[2], xyxy[3]) {
            Ok(b) => b,
            Err(_) => {
                dropped += 1;
                continue;
            }
        };
        let norm_box = match normalize_box(&pixel_box, record.dims) {
            Ok(b) => b,
            Err(_) => {
                dropped += 1;
                continue;
            }
        };
        annotations.push(Annotation {
            label: raw.label.clone(),
            pixel_box,
            norm_box,
        });
    }
    if annotations.is_empty() {
        return Err(UnifyRejection::NoValidAnnotations);
    }
    Ok(UnifiedRecord {
        instance: GroundingInstance {
            schema: (),
            id,
            dataset: record.dataset.clone(),
            image: record.image.clone(),
            dims: record.dims,
            annotations,
        },
        dropped_annotations: dropped,
    })
}

/// Why an otherwise valid instance is excluded from the pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    BelowMinEdge,
}

/// Keep/drop verdict for the minimum-edge filter; the threshold is
/// inclusive (`min_edge` itself passes).
pub fn filter_instance(instance: &GroundingInstance, min_edge: u32) -> Option<DropReason> {
    if instance.dims.min_edge() < min_edge {
        Some(DropReason::BelowMinEdge)
    } else {
        None
    }
}

/// Ingest accounting; record counts always satisfy
/// `kept + dropped_* = total`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub total: u64,
    pub kept: u64,
    pub dropped_malformed: u64,
    pub dropped_below_min_edge: u64,
    pub dropped_no_valid_annotations: u64,
    pub annotations_kept: u64,
    pub annotations_dropped: u64,
}

/// The unified, filtered grounding pool with a label lookup index.
#[derive(Debug, Clone)]
pub struct GroundingPool {
    instances: Vec<GroundingInstance>,
    label_index: BTreeMap<String, Vec<u64>>,
}

impl GroundingPool {
    /// Builds a pool, sorting by instance id and indexing labels.
    pub fn new(mut instances: Vec<GroundingInstance>) -> Result<Self, IngestError> {
        instances.sort_by_key(|i| i.id);
        for pair in instances.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(IngestError::DuplicateId(pair[0].id));
            }
        }
        let mut label_index: BTreeMap<String, Vec<u64>> = BTreeMap::new();
        for inst in &instances {
            if inst.annotations.is_empty() {
                return Err(IngestError::EmptyAnnotations(inst.id));
            }
            for label in inst.distinct_labels() {
                label_index.entry(label).or_default().push(inst.id);
            }
        }
        Ok(Self {
            instances,
            label_index,
        })
    }

    pub fn instances(&self) -> &[GroundingInstance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Instance ids whose annotation labels contain `label` (after
    /// normalization), in ascending id order.
    pub fn lookup_label(&self, label: &str) -> &[u64] {
        self.label_index
            .get(&normalize_label(label))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn save(&self, path: &Path) -> Result<(), IngestError> {
        io::write_jsonl(path, self.instances.iter())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let instances: Vec<GroundingInstance> = io::read_jsonl(path)?;
        Self::new(instances)
    }
}

/// Builds the pool from raw input lines.
///
/// Instance ids are the 0-based ordinal of the line within the input, so
/// concurrent variants of this routine would produce the same pool after
/// the id sort. Malformed lines are counted, not fatal; stream errors are.
pub fn build_pool<I>(lines: I, min_edge: u32) -> Result<(GroundingPool, IngestReport), IngestError>
where
    I: IntoIterator<Item = std::io::Result<String>>,
{
    let mut report = IngestReport::default();
    let mut instances = Vec::new();
    let mut next_id = 0u64;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        report.total += 1;
        let id = next_id;
        next_id += 1;
        let record: SourceRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(_) => {
                report.dropped_malformed += 1;
                continue;
            }
        };
        let unified = match unify_record(&record, id) {
            Ok(u) => u,
            Err(UnifyRejection::NoValidAnnotations) => {
                report.dropped_no_valid_annotations += 1;
                report.annotations_dropped += record.annotations.len() as u64;
                continue;
            }
        };
        report.annotations_dropped += unified.dropped_annotations as u64;
        if filter_instance(&unified.instance, min_edge).is_some() {
            report.dropped_below_min_edge += 1;
            continue;
        }
        report.annotations_kept += unified.instance.annotations.len() as u64;
        report.kept += 1;
        instances.push(unified.instance);
    }
    Ok((GroundingPool::new(instances)?, report))
}
