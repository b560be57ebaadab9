//! Exhaustive reference scorer used to cross-check the optimal matcher.
//!
//! Enumerates every index-respecting partial injection between the
//! prediction and ground-truth sets and takes the best matched-IoU sum.
//! Exponential in set size; intended for validation on small sets and
//! deliberately independent of the production matching code.

use crate::geometry::{iou, NormBox};
use crate::sample::TargetTuple;
use std::collections::BTreeMap;

/// Brute-force counterpart of [`r_miou`](crate::reward::r_miou).
///
/// Returns 0.0 when both sets are empty (the production scorer treats an
/// empty ground truth as a configuration error instead).
pub fn brute_force_miou(preds: &[TargetTuple], gts: &[TargetTuple]) -> f64 {
    let denom = preds.len().max(gts.len());
    if denom == 0 {
        return 0.0;
    }
    let mut by_idx: BTreeMap<usize, (Vec<&NormBox>, Vec<&NormBox>)> = BTreeMap::new();
    for p in preds {
        by_idx.entry(p.img_idx).or_default().0.push(&p.bbox_2d);
    }
    for g in gts {
        by_idx.entry(g.img_idx).or_default().1.push(&g.bbox_2d);
    }
    let sum: f64 = by_idx
        .values()
        .map(|(p, g)| best_injection(p, g))
        .sum();
    sum / denom as f64
}

fn best_injection(preds: &[&NormBox], gts: &[&NormBox]) -> f64 {
    fn recurse(preds: &[&NormBox], gts: &[&NormBox], used: &mut [bool], i: usize) -> f64 {
        if i == preds.len() {
            return 0.0;
        }
        let mut best = recurse(preds, gts, used, i + 1);
        for j in 0..gts.len() {
            if !used[j] {
                used[j] = true;
                let v = iou(preds[i], gts[j]) + recurse(preds, gts, used, i + 1);
                used[j] = false;
                if v > best {
                    best = v;
                }
            }
        }
        best
    }
    let mut used = vec![false; gts.len()];
    recurse(preds, gts, &mut used, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(img_idx: usize, b: [i64; 4]) -> TargetTuple {
        TargetTuple {
            img_idx,
            label: "x".into(),
            bbox_2d: NormBox::new(b[0], b[1], b[2], b[3]).unwrap(),
        }
    }

    #[test]
    fn perfect_match_scores_one() {
        let s = vec![t(0, [0, 0, 100, 100]), t(1, [10, 10, 50, 50])];
        assert_eq!(brute_force_miou(&s, &s), 1.0);
    }

    #[test]
    fn wrong_index_scores_zero() {
        let c = vec![t(1, [0, 0, 100, 100])];
        let s = vec![t(0, [0, 0, 100, 100])];
        assert_eq!(brute_force_miou(&c, &s), 0.0);
    }

    #[test]
    fn golden_half_score() {
        let c = vec![t(0, [0, 0, 100, 100]), t(1, [0, 0, 100, 100])];
        let s = vec![t(0, [0, 0, 100, 100]), t(0, [50, 0, 150, 100])];
        assert_eq!(brute_force_miou(&c, &s), 0.5);
    }
}
