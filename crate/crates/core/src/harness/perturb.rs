//! Synthetic response rendering and controlled perturbations.
//!
//! Renders well-formed Think-before-Grounding responses that encode a
//! ground-truth set mutated in a prescribed way, so reward behavior can be
//! probed along known axes (spatial jitter, wrong attribution, cardinality
//! errors, format corruption).

use super::HarnessError;
use crate::geometry::{NormBox, GRID};
use crate::parser::render_answer;
use crate::sample::TargetTuple;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Canned reasoning segment used in synthetic responses.
pub const SYNTH_THINK: &str = "Scanning each image for the queried object before answering.";

/// Format corruption modes; each trips a specific violation family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorruptMode {
    MissingThink,
    AnswerBeforeThink,
    UnclosedAnswer,
    TrailingProse,
    InvalidJson,
    MissingField,
    ExtraField,
    DegenerateBox,
    OutOfRangeCoordinate,
    NegativeIndex,
    NonIntegralCoordinate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Perturbation {
    /// Translate every box by a uniform offset in `[-magnitude, magnitude]`
    /// per axis, clamped so the box stays on the grid.
    BoxJitter { magnitude: u32 },
    /// Reattribute every target to a different image index.
    WrongIndex,
    /// Remove one target (the whole set if only one remains).
    DropTarget,
    /// Append a duplicate of one target.
    DuplicateTarget,
    CorruptFormat(CorruptMode),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PerturbationSpec {
    pub kind: Perturbation,
    pub seed: u64,
}

/// A clean response encoding the targets exactly; scores a full 2.0.
pub fn clean_response(targets: &[TargetTuple]) -> String {
    format!(
        "<think>{SYNTH_THINK}</think><answer>{}</answer>",
        render_answer(targets)
    )
}

/// Translates each box by an offset drawn uniformly from
/// `[-magnitude, magnitude]`, intersected with the offsets that keep the
/// box inside the grid. Extents are preserved.
pub fn jitter_targets(
    targets: &[TargetTuple],
    magnitude: u32,
    rng: &mut ChaCha8Rng,
) -> Vec<TargetTuple> {
    let m = magnitude as i64;
    targets
        .iter()
        .map(|t| {
            let b = t.bbox_2d;
            let dx = rng.gen_range((-m).max(-b.x1())..=m.min(GRID - 1 - b.x2()));
            let dy = rng.gen_range((-m).max(-b.y1())..=m.min(GRID - 1 - b.y2()));
            TargetTuple {
                img_idx: t.img_idx,
                label: t.label.clone(),
                bbox_2d: NormBox::new(b.x1() + dx, b.y1() + dy, b.x2() + dx, b.y2() + dy)
                    .expect("clamped translation stays on the grid"),
            }
        })
        .collect()
}

fn corrupt_response(targets: &[TargetTuple], mode: CorruptMode) -> String {
    let answer = render_answer(targets);
    let wrap = |answer: &str| format!("<think>{SYNTH_THINK}</think><answer>{answer}</answer>");
    match mode {
        CorruptMode::MissingThink => format!("<answer>{answer}</answer>"),
        CorruptMode::AnswerBeforeThink => {
            format!("<answer>{answer}</answer><think>{SYNTH_THINK}</think>")
        }
        CorruptMode::UnclosedAnswer => format!("<think>{SYNTH_THINK}</think><answer>{answer}"),
        CorruptMode::TrailingProse => {
            format!("{} The target is clearly visible.", wrap(&answer))
        }
        CorruptMode::InvalidJson => wrap("the box is around [10, 20] or so"),
        CorruptMode::MissingField
        | CorruptMode::ExtraField
        | CorruptMode::DegenerateBox
        | CorruptMode::OutOfRangeCoordinate
        | CorruptMode::NegativeIndex
        | CorruptMode::NonIntegralCoordinate => {
            let mut value: serde_json::Value =
                serde_json::from_str(&answer).expect("rendered answers are valid JSON");
            let first = value
                .get_mut(0)
                .expect("targets are non-empty")
                .as_object_mut()
                .expect("rendered targets are objects");
            match mode {
                CorruptMode::MissingField => {
                    first.remove("label");
                }
                CorruptMode::ExtraField => {
                    first.insert("confidence".into(), serde_json::json!(0.9));
                }
                CorruptMode::DegenerateBox => {
                    let bbox = first.get_mut("bbox_2d").unwrap().as_array_mut().unwrap();
                    bbox[2] = bbox[0].clone();
                }
                CorruptMode::OutOfRangeCoordinate => {
                    let bbox = first.get_mut("bbox_2d").unwrap().as_array_mut().unwrap();
                    bbox[2] = serde_json::json!(GRID);
                }
                CorruptMode::NegativeIndex => {
                    first.insert("img_idx".into(), serde_json::json!(-1));
                }
                CorruptMode::NonIntegralCoordinate => {
                    let bbox = first.get_mut("bbox_2d").unwrap().as_array_mut().unwrap();
                    let v = bbox[0].as_f64().unwrap();
                    bbox[0] = serde_json::json!(v + 0.5);
                }
                _ => unreachable!(),
            }
            wrap(&value.to_string())
        }
    }
}

/// Renders a response encoding `targets` mutated per `spec`.
///
/// `num_images` bounds the index space for reattribution and must be at
/// least 2 for [`Perturbation::WrongIndex`].
pub fn perturb_response(
    targets: &[TargetTuple],
    num_images: usize,
    spec: &PerturbationSpec,
) -> Result<String, HarnessError> {
    if targets.is_empty() {
        return Err(HarnessError::EmptyTargets);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let text = match spec.kind {
        Perturbation::BoxJitter { magnitude } => {
            clean_response(&jitter_targets(targets, magnitude, &mut rng))
        }
        Perturbation::WrongIndex => {
            if num_images < 2 {
                return Err(HarnessError::NeedMoreImages {
                    needed: 2,
                    got: num_images,
                });
            }
            let moved: Vec<TargetTuple> = targets
                .iter()
                .map(|t| TargetTuple {
                    img_idx: (t.img_idx + 1 + rng.gen_range(0..num_images - 1)) % num_images,
                    label: t.label.clone(),
                    bbox_2d: t.bbox_2d,
                })
                .collect();
            clean_response(&moved)
        }
        Perturbation::DropTarget => {
            let mut kept = targets.to_vec();
            kept.remove(rng.gen_range(0..kept.len()));
            clean_response(&kept)
        }
        Perturbation::DuplicateTarget => {
            let mut padded = targets.to_vec();
            padded.push(padded[rng.gen_range(0..padded.len())].clone());
            clean_response(&padded)
        }
        Perturbation::CorruptFormat(mode) => corrupt_response(targets, mode),
    };
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::total_reward;

    fn targets() -> Vec<TargetTuple> {
        vec![TargetTuple {
            img_idx: 1,
            label: "cup".into(),
            bbox_2d: NormBox::new(200, 200, 500, 500).unwrap(),
        }]
    }

    #[test]
    fn zero_jitter_scores_full_reward() {
        let s = targets();
        let text = perturb_response(
            &s,
            3,
            &PerturbationSpec {
                kind: Perturbation::BoxJitter { magnitude: 0 },
                seed: 5,
            },
        )
        .unwrap();
        let b = total_reward(&text, &s).unwrap();
        assert_eq!(b.total, 2.0);
    }

    #[test]
    fn wrong_index_zeroes_spatial_reward() {
        let s = targets();
        for seed in 0..20 {
            let text = perturb_response(
                &s,
                3,
                &PerturbationSpec {
                    kind: Perturbation::WrongIndex,
                    seed,
                },
            )
            .unwrap();
            let b = total_reward(&text, &s).unwrap();
            assert_eq!(b.r_format, 1);
            assert_eq!(b.r_miou, 0.0);
        }
    }

    #[test]
    fn wrong_index_needs_multiple_images() {
        let err = perturb_response(
            &targets(),
            1,
            &PerturbationSpec {
                kind: Perturbation::WrongIndex,
                seed: 0,
            },
        )
        .unwrap_err();
        assert!(matches!(err, HarnessError::NeedMoreImages { .. }));
    }

    #[test]
    fn drop_on_single_target_yields_empty_list() {
        let s = targets();
        let text = perturb_response(
            &s,
            3,
            &PerturbationSpec {
                kind: Perturbation::DropTarget,
                seed: 0,
            },
        )
        .unwrap();
        let b = total_reward(&text, &s).unwrap();
        assert_eq!(b.r_format, 1);
        assert_eq!(b.r_miou, 0.0);
    }

    #[test]
    fn duplicate_halves_single_target_reward() {
        let s = targets();
        let text = perturb_response(
            &s,
            3,
            &PerturbationSpec {
                kind: Perturbation::DuplicateTarget,
                seed: 0,
            },
        )
        .unwrap();
        let b = total_reward(&text, &s).unwrap();
        assert_eq!(b.r_miou, 0.5);
    }

    #[test]
    fn every_corrupt_mode_zeroes_format() {
        let s = targets();
        let modes = [
            CorruptMode::MissingThink,
            CorruptMode::AnswerBeforeThink,
            CorruptMode::UnclosedAnswer,
            CorruptMode::TrailingProse,
            CorruptMode::InvalidJson,
            CorruptMode::MissingField,
            CorruptMode::ExtraField,
            CorruptMode::DegenerateBox,
            CorruptMode::OutOfRangeCoordinate,
            CorruptMode::NegativeIndex,
            CorruptMode::NonIntegralCoordinate,
        ];
        for mode in modes {
            let text = perturb_response(
                &s,
                3,
                &PerturbationSpec {
                    kind: Perturbation::CorruptFormat(mode),
                    seed: 0,
                },
            )
            .unwrap();
            let b = total_reward(&text, &s).unwrap();
            assert_eq!(b.r_format, 0, "mode {mode:?} should break the format");
            assert_eq!(b.total, 0.0);
        }
    }

    #[test]
    fn jitter_respects_grid_bounds() {
        let s = vec![TargetTuple {
            img_idx: 0,
            label: "edge".into(),
            bbox_2d: NormBox::new(0, 900, 120, 999).unwrap(),
        }];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let moved = jitter_targets(&s, 200, &mut rng);
            let b = moved[0].bbox_2d;
            assert_eq!(b.width(), 120);
            assert_eq!(b.height(), 99);
        }
    }
}
