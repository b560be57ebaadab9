//! Correlated cross-view samples from a single source image.
//!
//! One annotation seeds three views of the same target: the original
//! image, an object-centered Focus crop at 1.2x-1.5x object scale, and a
//! Context crop at 1.8x-2.5x. Crop offsets are drawn uniformly over every
//! placement that keeps the target fully visible and the crop inside the
//! image; when the desired size exceeds the image the crop is shifted
//! rather than shrunk, shrinking only to the image extent itself. The
//! annotation's box is remapped into each crop's local grid, so labels
//! stay geometrically consistent across views.

use super::{labels_with_display, stream_rng, SynthError, SynthReport};
use crate::geometry::{remap_box, round_half_up, CropRegion, ImageDims, PixelBox};
use crate::ingest::{normalize_label, GroundingInstance, GroundingPool};
use crate::sample::{
    ImageSlot, IntraSampleGeometry, MultiImageSample, RngTrace, TargetTuple, ViewKind, ViewSpec,
};
use crate::template::{Branch, TemplatePool};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Focus-view crop scale range (multiples of the target box size).
pub const FOCUS_RATIO: (f64, f64) = (1.2, 1.5);
/// Context-view crop scale range.
pub const CONTEXT_RATIO: (f64, f64) = (1.8, 2.5);

const CROP_RETRY_BUDGET: usize = 16;

fn crop_axis(
    lo_edge: f64,
    hi_edge: f64,
    extent: u32,
    ratio: f64,
    rng: &mut ChaCha8Rng,
) -> (i64, i64) {
    let extent = extent as i64;
    // Smallest integer length that can contain [lo_edge, hi_edge] at an
    // integer origin.
    let span_min = hi_edge.ceil() as i64 - lo_edge.floor() as i64;
    let desired = ratio * (hi_edge - lo_edge);
    let len = round_half_up(desired).clamp(span_min, extent);
    let min_origin = 0.max(hi_edge.ceil() as i64 - len);
    let max_origin = (extent - len).min(lo_edge.floor() as i64);
    debug_assert!(min_origin <= max_origin);
    let origin = rng.gen_range(min_origin..=max_origin);
    (origin, len)
}

/// Samples an object-centered crop that fully contains `target`.
///
/// The scale is drawn uniformly from `ratio_range` and applied per axis
/// (crop side = ratio x target side); the origin is drawn uniformly over
/// all valid placements. RNG consumption order: ratio, x origin, y origin.
pub fn sample_crop_region(
    dims: ImageDims,
    target: &PixelBox,
    ratio_range: (f64, f64),
    rng: &mut ChaCha8Rng,
) -> Result<(CropRegion, f64), SynthError> {
    let (lo, hi) = ratio_range;
    if !(1.0 <= lo && lo <= hi) {
        return Err(SynthError::InvalidRatioRange);
    }
    if !dims.contains(target) {
        return Err(crate::geometry::GeometryError::OutsideImage.into());
    }
    let ratio = rng.gen_range(lo..=hi);
    let (x, w) = crop_axis(target.x1(), target.x2(), dims.width, ratio, rng);
    let (y, h) = crop_axis(target.y1(), target.y2(), dims.height, ratio, rng);
    let crop = CropRegion::new(x as u32, y as u32, w as u32, h as u32, dims)?;
    debug_assert!(crop.contains(target));
    Ok((crop, ratio))
}

/// Annotation ordinals whose label is unique within the instance.
fn unambiguous_annotations(instance: &GroundingInstance) -> Vec<usize> {
    let labels = labels_with_display(instance);
    labels
        .iter()
        .filter(|(norm, _)| {
            instance
                .annotations
                .iter()
                .filter(|a| normalize_label(&a.label) == *norm)
                .count()
                == 1
        })
        .map(|(norm, _)| {
            instance
                .annotations
                .iter()
                .position(|a| normalize_label(&a.label) == *norm)
                .expect("label came from this instance")
        })
        .collect()
}

/// Composes one intra-branch sample from a source instance.
///
/// RNG consumption order: annotation choice, template choice, crop
/// sampling (re-drawn until the Context crop's area strictly exceeds the
/// Focus crop's, within a fixed budget), slot shuffle.
pub fn compose_intra_sample(
    id: String,
    trace: RngTrace,
    instance: &GroundingInstance,
    templates: &TemplatePool,
    rng: &mut ChaCha8Rng,
) -> Result<MultiImageSample, SynthError> {
    let candidates = unambiguous_annotations(instance);
    if candidates.is_empty() {
        return Err(SynthError::NoUnambiguousAnnotation(instance.id));
    }
    let ann = &instance.annotations[candidates[rng.gen_range(0..candidates.len())]];

    let intra_templates = templates.branch(Branch::Intra);
    let template = intra_templates[rng.gen_range(0..intra_templates.len())];

    let mut crops = None;
    for _ in 0..CROP_RETRY_BUDGET {
        let focus = sample_crop_region(instance.dims, &ann.pixel_box, FOCUS_RATIO, rng)?;
        let context = sample_crop_region(instance.dims, &ann.pixel_box, CONTEXT_RATIO, rng)?;
        if context.0.area() > focus.0.area() {
            crops = Some((focus, context));
            break;
        }
    }
    let ((focus_crop, focus_ratio), (context_crop, context_ratio)) =
        crops.ok_or(SynthError::CropSamplingExhausted)?;

    let view_boxes = [
        ann.norm_box,
        remap_box(&ann.pixel_box, &focus_crop)?,
        remap_box(&ann.pixel_box, &context_crop)?,
    ];
    let view_kinds = [ViewKind::Original, ViewKind::Focus, ViewKind::Context];
    let view_crops = [None, Some(focus_crop), Some(context_crop)];
    let view_ratios = [None, Some(focus_ratio), Some(context_ratio)];

    // order[slot] = view index shown at that slot.
    let mut order: Vec<usize> = (0..3).collect();
    order.shuffle(rng);

    let slots: Vec<ImageSlot> = order
        .iter()
        .map(|&v| ImageSlot {
            instance: instance.id,
            image: instance.image.clone(),
            dims: view_crops[v].map(|c| c.dims()).unwrap_or(instance.dims),
            view: Some(view_kinds[v]),
            crop: view_crops[v],
        })
        .collect();

    let targets: Vec<TargetTuple> = order
        .iter()
        .enumerate()
        .map(|(slot, &v)| TargetTuple {
            img_idx: slot,
            label: ann.label.clone(),
            bbox_2d: view_boxes[v],
        })
        .collect();

    let views: Vec<ViewSpec> = (0..3)
        .map(|v| ViewSpec {
            kind: view_kinds[v],
            slot: order.iter().position(|&o| o == v).expect("all views placed"),
            ratio: view_ratios[v],
            crop: view_crops[v],
            bbox_2d: view_boxes[v],
        })
        .collect();

    Ok(MultiImageSample {
        schema: (),
        id,
        branch: Branch::Intra,
        rng: trace,
        template: template.id.clone(),
        query: template.instantiate(&ann.label),
        slots,
        targets,
        geometry: Some(IntraSampleGeometry {
            schema: (),
            instance: instance.id,
            label: ann.label.clone(),
            pixel_box: ann.pixel_box,
            views,
        }),
    })
}

fn synth_intra_impl(
    pool: &GroundingPool,
    n_samples: usize,
    templates: &TemplatePool,
    master_seed: u64,
    sequential: bool,
) -> Result<SynthReport, SynthError> {
    if n_samples == 0 {
        return Ok(SynthReport {
            samples: Vec::new(),
            skipped_instances: 0,
            redraws: 0,
        });
    }
    if pool.len() < n_samples {
        return Err(SynthError::PoolTooSmall {
            needed: n_samples,
            available: pool.len(),
        });
    }

    let mut order_rng = stream_rng(master_seed, 0);
    let mut remaining: Vec<usize> = (0..pool.len()).collect();
    let mut skipped = 0u64;
    let mut assigned: Vec<(usize, usize)> = Vec::with_capacity(n_samples);
    for sample_idx in 0..n_samples {
        loop {
            if remaining.is_empty() {
                return Err(SynthError::PoolTooSmall {
                    needed: n_samples,
                    available: assigned.len(),
                });
            }
            let pos = order_rng.gen_range(0..remaining.len());
            let pool_idx = remaining.swap_remove(pos);
            if unambiguous_annotations(&pool.instances()[pool_idx]).is_empty() {
                skipped += 1;
                continue;
            }
            assigned.push((sample_idx, pool_idx));
            break;
        }
    }

    let samples: Result<Vec<MultiImageSample>, SynthError> = crate::par::map_collect_mode(
        assigned,
        |(i, pool_idx)| {
            let stream = i as u64 + 1;
            let mut rng = stream_rng(master_seed, stream);
            compose_intra_sample(
                format!("intra-{i:06}"),
                RngTrace {
                    master: master_seed,
                    stream,
                },
                &pool.instances()[pool_idx],
                templates,
                &mut rng,
            )
        },
        sequential,
    )
    .into_iter()
    .collect();

    Ok(SynthReport {
        samples: samples?,
        skipped_instances: skipped,
        redraws: 0,
    })
}

/// Synthesizes `n_samples` intra-branch samples, one source instance
/// consumed per sample. Instances lacking an unambiguous annotation are
/// consumed and skipped. Deterministic per master seed.
pub fn synth_intra_dataset(
    pool: &GroundingPool,
    n_samples: usize,
    templates: &TemplatePool,
    master_seed: u64,
) -> Result<SynthReport, SynthError> {
    synth_intra_impl(pool, n_samples, templates, master_seed, false)
}

/// Sequential twin of [`synth_intra_dataset`] (benchmark baseline).
pub fn synth_intra_dataset_sequential(
    pool: &GroundingPool,
    n_samples: usize,
    templates: &TemplatePool,
    master_seed: u64,
) -> Result<SynthReport, SynthError> {
    synth_intra_impl(pool, n_samples, templates, master_seed, true)
}
