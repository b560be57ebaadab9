//! Distractor-rich samples from semantically decoupled instances.
//!
//! Each sample draws `k` instances with pairwise-distinct image
//! references, designates one of them as the target, picks a query label
//! that appears in no other drawn instance (so the referent stays
//! unambiguous), shuffles the image order, and anchors every ground-truth
//! tuple to the designated instance's post-shuffle slot. Boxes pass
//! through unchanged: this branch performs no geometric transform.

use super::{labels_with_display, stream_rng, SynthError, SynthReport};
use crate::ingest::{GroundingInstance, GroundingPool};
use crate::sample::{ImageSlot, MultiImageSample, RngTrace, TargetTuple};
use crate::template::{Branch, TemplatePool};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Images per inter-branch sample unless overridden.
pub const DEFAULT_K: usize = 3;

const SET_REDRAW_BUDGET: usize = 16;

/// Draws `k` instances with pairwise-distinct image references, uniformly
/// without replacement over the distinct references.
pub fn sample_orthogonal<'a>(
    pool: &'a GroundingPool,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<&'a GroundingInstance>, SynthError> {
    if k == 0 {
        return Err(SynthError::InvalidK);
    }
    let mut refs: Vec<Vec<usize>> = Vec::new();
    let mut by_image: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
    for (idx, inst) in pool.instances().iter().enumerate() {
        match by_image.get(inst.image.as_str()) {
            Some(&pos) => refs[pos].push(idx),
            None => {
                by_image.insert(&inst.image, refs.len());
                refs.push(vec![idx]);
            }
        }
    }
    if refs.len() < k {
        return Err(SynthError::DistinctImagesExhausted {
            needed: k,
            available: refs.len(),
        });
    }
    let chosen = rand::seq::index::sample(rng, refs.len(), k);
    let mut out = Vec::with_capacity(k);
    for ref_idx in chosen.iter() {
        let bucket = &refs[ref_idx];
        let pick = if bucket.len() == 1 {
            bucket[0]
        } else {
            bucket[rng.gen_range(0..bucket.len())]
        };
        out.push(&pool.instances()[pick]);
    }
    Ok(out)
}

/// `(instance position, normalized label, display label)` choices that
/// satisfy the conflict rule: the label occurs in exactly one drawn
/// instance's annotation set.
fn conflict_free_pairs(instances: &[&GroundingInstance]) -> Vec<(usize, String, String)> {
    let label_sets: Vec<Vec<(String, String)>> =
        instances.iter().map(|i| labels_with_display(i)).collect();
    let mut out = Vec::new();
    for (d, labels) in label_sets.iter().enumerate() {
        for (norm, display) in labels {
            let collides = label_sets
                .iter()
                .enumerate()
                .any(|(o, other)| o != d && other.iter().any(|(n, _)| n == norm));
            if !collides {
                out.push((d, norm.clone(), display.clone()));
            }
        }
    }
    out
}

/// Composes one inter-branch sample from an already drawn instance set.
///
/// RNG consumption order: referent choice, template choice, slot shuffle.
/// Signals a resample to the caller when no conflict-free label exists.
pub fn compose_inter_sample(
    id: String,
    trace: RngTrace,
    instances: &[&GroundingInstance],
    templates: &TemplatePool,
    rng: &mut ChaCha8Rng,
) -> Result<MultiImageSample, SynthError> {
    let feasible = conflict_free_pairs(instances);
    if feasible.is_empty() {
        return Err(SynthError::NoConflictFreeLabel);
    }
    let (designated, norm_label, display_label) = feasible[rng.gen_range(0..feasible.len())].clone();

    let inter_templates = templates.branch(Branch::Inter);
    let template = inter_templates[rng.gen_range(0..inter_templates.len())];

    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.shuffle(rng);
    let designated_slot = order
        .iter()
        .position(|&i| i == designated)
        .expect("designated instance is in the order");

    let slots: Vec<ImageSlot> = order
        .iter()
        .map(|&i| ImageSlot {
            instance: instances[i].id,
            image: instances[i].image.clone(),
            dims: instances[i].dims,
            view: None,
            crop: None,
        })
        .collect();

    let targets: Vec<TargetTuple> = instances[designated]
        .annotations
        .iter()
        .filter(|ann| crate::ingest::normalize_label(&ann.label) == norm_label)
        .map(|ann| TargetTuple {
            img_idx: designated_slot,
            label: ann.label.clone(),
            bbox_2d: ann.norm_box,
        })
        .collect();

    Ok(MultiImageSample {
        schema: (),
        id,
        branch: Branch::Inter,
        rng: trace,
        template: template.id.clone(),
        query: template.instantiate(&display_label),
        slots,
        targets,
        geometry: None,
    })
}

/// Synthesizes `n_samples` inter-branch samples.
///
/// Instances are consumed without reuse across samples: stream 0 of the
/// master seed drives the consumption order, and each sample's
/// composition runs on its own stream, so output is byte-stable across
/// reruns and thread counts. Drawn sets that admit no conflict-free query
/// label are returned to the pool and redrawn, up to a fixed budget per
/// sample.
pub fn synth_inter_dataset(
    pool: &GroundingPool,
    n_samples: usize,
    k: usize,
    templates: &TemplatePool,
    master_seed: u64,
) -> Result<SynthReport, SynthError> {
    if k == 0 {
        return Err(SynthError::InvalidK);
    }
    if n_samples == 0 {
        return Ok(SynthReport {
            samples: Vec::new(),
            skipped_instances: 0,
            redraws: 0,
        });
    }
    let needed = n_samples.saturating_mul(k);
    if pool.len() < needed {
        return Err(SynthError::PoolTooSmall {
            needed,
            available: pool.len(),
        });
    }

    let mut order_rng = stream_rng(master_seed, 0);
    // Buckets of pool indices per distinct image reference, in pool order.
    let mut refs: Vec<Vec<usize>> = Vec::new();
    {
        let mut by_image: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
        for (idx, inst) in pool.instances().iter().enumerate() {
            match by_image.get(inst.image.as_str()) {
                Some(&pos) => refs[pos].push(idx),
                None => {
                    by_image.insert(&inst.image, refs.len());
                    refs.push(vec![idx]);
                }
            }
        }
    }

    let mut redraws = 0u64;
    let mut assignments: Vec<Vec<usize>> = Vec::with_capacity(n_samples);
    for sample_idx in 0..n_samples {
        let mut committed = false;
        for _attempt in 0..SET_REDRAW_BUDGET {
            if refs.len() < k {
                return Err(SynthError::DistinctImagesExhausted {
                    needed: k,
                    available: refs.len(),
                });
            }
            let ref_positions = rand::seq::index::sample(&mut order_rng, refs.len(), k);
            let mut picks: Vec<(usize, usize)> = Vec::with_capacity(k);
            for ref_pos in ref_positions.iter() {
                let bucket = &refs[ref_pos];
                let inst_pos = if bucket.len() == 1 {
                    0
                } else {
                    order_rng.gen_range(0..bucket.len())
                };
                picks.push((ref_pos, inst_pos));
            }
            let chosen: Vec<&GroundingInstance> = picks
                .iter()
                .map(|&(r, i)| &pool.instances()[refs[r][i]])
                .collect();
            if conflict_free_pairs(&chosen).is_empty() {
                redraws += 1;
                continue;
            }
            assignments.push(picks.iter().map(|&(r, i)| refs[r][i]).collect());
            // Commit: drain the picked instances; drop emptied buckets in
            // descending position order so earlier positions stay valid.
            let mut emptied = Vec::new();
            for &(r, i) in &picks {
                refs[r].swap_remove(i);
                if refs[r].is_empty() {
                    emptied.push(r);
                }
            }
            emptied.sort_unstable_by(|a, b| b.cmp(a));
            for r in emptied {
                refs.swap_remove(r);
            }
            committed = true;
            break;
        }
        if !committed {
            return Err(SynthError::ConflictRetryExhausted {
                sample: sample_idx,
                attempts: SET_REDRAW_BUDGET,
            });
        }
    }

    let indexed: Vec<(usize, Vec<usize>)> = assignments.into_iter().enumerate().collect();
    let samples: Result<Vec<MultiImageSample>, SynthError> =
        crate::par::map_collect(indexed, |(i, pool_indices)| {
            let instances: Vec<&GroundingInstance> = pool_indices
                .iter()
                .map(|&idx| &pool.instances()[idx])
                .collect();
            let stream = i as u64 + 1;
            let mut rng = stream_rng(master_seed, stream);
            compose_inter_sample(
                format!("inter-{i:06}"),
                RngTrace {
                    master: master_seed,
                    stream,
                },
                &instances,
                templates,
                &mut rng,
            )
        })
        .into_iter()
        .collect();

    Ok(SynthReport {
        samples: samples?,
        skipped_instances: 0,
        redraws,
    })
}
