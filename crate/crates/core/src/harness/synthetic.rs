//! Seeded synthetic fixtures: pools, target sets, scored pairs, and
//! ready-made samples for validation suites and benchmarks.
//!
//! Generated images keep a minimum edge of 640px and targets between 40
//! and 400px per side, so every object-centered crop stays within 1000px
//! and grid round-trips hold to within one pixel.

use crate::geometry::{normalize_box, ImageDims, NormBox, PixelBox};
use crate::ingest::{Annotation, GroundingInstance, GroundingPool};
use crate::reward::ScorePair;
use crate::sample::{MultiImageSample, TargetTuple};
use crate::template::{Branch, TemplatePool};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::perturb::{self, CorruptMode, Perturbation, PerturbationSpec};

/// A pool of `n` synthetic instances with distinct image references.
///
/// Dimensions are drawn from `[640, 1280]`, each instance holds one to
/// three annotations with instance-unique labels (a small shared
/// vocabulary appears occasionally so label conflicts across instances
/// stay reachable).
pub fn synthetic_pool(n: usize, seed: u64) -> GroundingPool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances = (0..n)
        .map(|i| {
            let dims = ImageDims::new(
                rng.gen_range(640..=1280),
                rng.gen_range(640..=1280),
            )
            .unwrap();
            let ann_count = rng.gen_range(1..=3);
            let annotations = (0..ann_count)
                .map(|j| {
                    let w = rng.gen_range(40..=400).min(dims.width as i64 - 2);
                    let h = rng.gen_range(40..=400).min(dims.height as i64 - 2);
                    let x1 = rng.gen_range(0..=(dims.width as i64 - w));
                    let y1 = rng.gen_range(0..=(dims.height as i64 - h));
                    let pixel_box =
                        PixelBox::new(x1 as f64, y1 as f64, (x1 + w) as f64, (y1 + h) as f64)
                            .unwrap();
                    let label = if rng.gen_bool(0.15) {
                        format!("shared-{}", rng.gen_range(0..8))
                    } else {
                        format!("object-{i}-{j}")
                    };
                    Annotation {
                        label,
                        norm_box: normalize_box(&pixel_box, dims).unwrap(),
                        pixel_box,
                    }
                })
                .collect();
            GroundingInstance {
                schema: (),
                id: i as u64,
                dataset: "synthetic".into(),
                image: format!("img-{i:06}.png"),
                dims,
                annotations,
            }
        })
        .collect();
    GroundingPool::new(instances).expect("synthetic instances are valid")
}

/// A random valid grid box with sides in `[min_extent, max_extent]`.
pub fn random_norm_box(rng: &mut ChaCha8Rng, min_extent: i64, max_extent: i64) -> NormBox {
    let w = rng.gen_range(min_extent..=max_extent);
    let h = rng.gen_range(min_extent..=max_extent);
    let x1 = rng.gen_range(0..=(999 - w));
    let y1 = rng.gen_range(0..=(999 - h));
    NormBox::new(x1, y1, x1 + w, y1 + h).unwrap()
}

/// `len` random targets spread over image indices `0..num_indices`.
pub fn random_target_set(rng: &mut ChaCha8Rng, len: usize, num_indices: usize) -> Vec<TargetTuple> {
    (0..len)
        .map(|j| TargetTuple {
            img_idx: rng.gen_range(0..num_indices),
            label: format!("thing-{j}"),
            bbox_2d: random_norm_box(rng, 30, 300),
        })
        .collect()
}

/// One random single-target ground truth over three image slots.
pub fn random_single_target(rng: &mut ChaCha8Rng) -> Vec<TargetTuple> {
    vec![TargetTuple {
        img_idx: rng.gen_range(0..3),
        label: "target".into(),
        bbox_2d: random_norm_box(rng, 50, 400),
    }]
}

/// A random (predictions, ground truth) pair for matcher validation:
/// ground truth of one to six targets over up to three indices, and
/// predictions derived by dropping, copying, jittering, reattributing, or
/// hallucinating entries, capped at six.
pub fn random_scored_pair(rng: &mut ChaCha8Rng) -> (Vec<TargetTuple>, Vec<TargetTuple>) {
    let gt_len = rng.gen_range(1..=6);
    let gts = random_target_set(rng, gt_len, 3);
    let mut preds: Vec<TargetTuple> = Vec::new();
    for g in &gts {
        match rng.gen_range(0..5) {
            0 => {} // dropped
            1 => preds.push(g.clone()),
            2 => preds.extend(perturb::jitter_targets(std::slice::from_ref(g), 120, rng)),
            3 => preds.push(TargetTuple {
                img_idx: (g.img_idx + 1) % 3,
                label: g.label.clone(),
                bbox_2d: g.bbox_2d,
            }),
            _ => preds.push(TargetTuple {
                img_idx: rng.gen_range(0..3),
                label: "noise".into(),
                bbox_2d: random_norm_box(rng, 30, 300),
            }),
        }
    }
    while preds.len() < 6 && rng.gen_bool(0.2) {
        preds.push(TargetTuple {
            img_idx: rng.gen_range(0..3),
            label: "noise".into(),
            bbox_2d: random_norm_box(rng, 30, 300),
        });
    }
    preds.truncate(6);
    (preds, gts)
}

/// `n` synthesized samples of one branch, built through the real
/// synthesis pipeline over a synthetic pool.
pub fn synthetic_samples(branch: Branch, n: usize, seed: u64) -> Vec<MultiImageSample> {
    let templates = TemplatePool::builtin();
    match branch {
        Branch::Inter => {
            let pool = synthetic_pool(n * crate::synth::inter::DEFAULT_K + 8, seed);
            crate::synth::inter::synth_inter_dataset(
                &pool,
                n,
                crate::synth::inter::DEFAULT_K,
                &templates,
                seed,
            )
            .expect("synthetic pool supports inter synthesis")
            .samples
        }
        Branch::Intra => {
            let pool = synthetic_pool(n + 8, seed.wrapping_add(1));
            crate::synth::intra::synth_intra_dataset(&pool, n, &templates, seed)
                .expect("synthetic pool supports intra synthesis")
                .samples
        }
    }
}

/// `n` scoring pairs mixing clean, degraded, and corrupt responses; the
/// workload used for throughput checks and benchmarks.
pub fn synthetic_score_pairs(n: usize, seed: u64) -> Vec<ScorePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let gt_len = rng.gen_range(1..=4);
            let gts = random_target_set(&mut rng, gt_len, 3);
            let case_seed = rng.gen();
            let spec = match i % 5 {
                0 => None,
                1 => Some(PerturbationSpec {
                    kind: Perturbation::BoxJitter { magnitude: 80 },
                    seed: case_seed,
                }),
                2 => Some(PerturbationSpec {
                    kind: Perturbation::WrongIndex,
                    seed: case_seed,
                }),
                3 => Some(PerturbationSpec {
                    kind: Perturbation::DuplicateTarget,
                    seed: case_seed,
                }),
                _ => Some(PerturbationSpec {
                    kind: Perturbation::CorruptFormat(CorruptMode::TrailingProse),
                    seed: case_seed,
                }),
            };
            let response = match spec {
                None => perturb::clean_response(&gts),
                Some(spec) => perturb::perturb_response(&gts, 3, &spec)
                    .expect("synthetic targets are non-empty"),
            };
            ScorePair {
                schema: (),
                id: format!("case-{i:05}"),
                ground_truth: gts,
                response,
            }
        })
        .collect()
}
