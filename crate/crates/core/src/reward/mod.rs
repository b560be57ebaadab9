//! Rule-based spatial reward: binary format validity plus source-aware
//! set-wise IoU under exact per-image-index optimal matching.
//!
//! Predictions and ground truth are partitioned by image index; boxes are
//! matched within each shared index to maximize the summed IoU, and the
//! matched sum is normalized by the larger set's cardinality. Predictions
//! attributed to an image with no ground truth contribute nothing to the
//! numerator while still inflating the denominator. Labels are carried
//! through for output validity but never matched on.

mod matching;
pub mod reference;

use crate::geometry::{iou, NormBox};
use crate::parser::{parse_response, ViolationCode};
use crate::sample::TargetTuple;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewardError {
    #[error("ground-truth target set is empty")]
    EmptyGroundTruth,
}

/// One matched (prediction, ground truth) pair within an image index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub img_idx: usize,
    pub pred: usize,
    pub gt: usize,
    pub iou: f64,
}

/// The assignment that produced a spatial reward. Ordinals refer to the
/// original prediction/ground-truth lists; every ordinal appears in at
/// most one pair and pairs never cross image indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchDetail {
    pub matches: Vec<MatchedPair>,
    pub unmatched_preds: Vec<usize>,
    pub unmatched_gts: Vec<usize>,
}

impl MatchDetail {
    pub fn empty() -> Self {
        Self::default()
    }
}

/// Full reward decomposition for one response.
///
/// `r_format == 0` implies `r_miou == 0` and an empty match detail: an
/// invalid response never earns spatial credit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_miou: f64,
    pub r_format: u8,
    pub total: f64,
    #[serde(flatten)]
    pub detail: MatchDetail,
    pub violations: Vec<ViolationCode>,
}

/// Maximum-total-IoU pairing between two box sets of one image index.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMatch {
    /// `(pred ordinal, gt ordinal, iou)`, sorted, only positive-IoU pairs.
    pub pairs: Vec<(usize, usize, f64)>,
    pub total: f64,
}

/// Solves the assignment between `preds` and `gts` exactly, maximizing the
/// summed IoU. Value ties are broken toward the lexicographically smallest
/// `(pred, gt)` pairing (for sets small enough for the exhaustive-memo
/// path, which covers all realistic inputs).
pub fn match_group(preds: &[NormBox], gts: &[NormBox]) -> GroupMatch {
    let profit: Vec<Vec<f64>> = preds
        .iter()
        .map(|p| gts.iter().map(|g| iou(p, g)).collect())
        .collect();
    let assignment = matching::max_profit_assignment(&profit);
    GroupMatch {
        pairs: assignment
            .pairs
            .into_iter()
            .map(|(i, j)| (i, j, profit[i][j]))
            .collect(),
        total: assignment.total,
    }
}

/// Source-aware set-wise IoU reward in `[0, 1]`.
///
/// Equals 1 exactly when the predictions form an index-respecting
/// bijection with the ground truth at IoU 1 everywhere and the set sizes
/// agree.
pub fn r_miou(
    preds: &[TargetTuple],
    gts: &[TargetTuple],
) -> Result<(f64, MatchDetail), RewardError> {
    if gts.is_empty() {
        return Err(RewardError::EmptyGroundTruth);
    }

    let mut by_idx: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (ord, p) in preds.iter().enumerate() {
        by_idx.entry(p.img_idx).or_default().0.push(ord);
    }
    for (ord, g) in gts.iter().enumerate() {
        by_idx.entry(g.img_idx).or_default().1.push(ord);
    }

    let mut matches = Vec::new();
    let mut matched_p = vec![false; preds.len()];
    let mut matched_g = vec![false; gts.len()];
    for (idx, (ps, gs)) in &by_idx {
        if ps.is_empty() || gs.is_empty() {
            continue;
        }
        let boxes_p: Vec<NormBox> = ps.iter().map(|&o| preds[o].bbox_2d).collect();
        let boxes_g: Vec<NormBox> = gs.iter().map(|&o| gts[o].bbox_2d).collect();
        for (pi, gi, pair_iou) in match_group(&boxes_p, &boxes_g).pairs {
            matched_p[ps[pi]] = true;
            matched_g[gs[gi]] = true;
            matches.push(MatchedPair {
                img_idx: *idx,
                pred: ps[pi],
                gt: gs[gi],
                iou: pair_iou,
            });
        }
    }

    let sum: f64 = matches.iter().map(|m| m.iou).sum();
    let score = sum / preds.len().max(gts.len()) as f64;
    let detail = MatchDetail {
        matches,
        unmatched_preds: (0..preds.len()).filter(|&o| !matched_p[o]).collect(),
        unmatched_gts: (0..gts.len()).filter(|&o| !matched_g[o]).collect(),
    };
    Ok((score, detail))
}

/// Scores a raw response against a ground-truth set.
///
/// The format reward is 1 iff the response parses with zero violations;
/// the spatial reward is computed only then, so invalid text scores 0
/// total.
pub fn total_reward(
    response: &str,
    gts: &[TargetTuple],
) -> Result<RewardBreakdown, RewardError> {
    let parsed = parse_response(response);
    match parsed.predictions {
        Some(preds) => {
            let (score, detail) = r_miou(&preds, gts)?;
            Ok(RewardBreakdown {
                r_miou: score,
                r_format: 1,
                total: 1.0 + score,
                detail,
                violations: Vec::new(),
            })
        }
        None => Ok(RewardBreakdown {
            r_miou: 0.0,
            r_format: 0,
            total: 0.0,
            detail: MatchDetail::empty(),
            violations: parsed.violations,
        }),
    }
}

/// One line of a batch scoring file (`scorepair/v1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorePair {
    #[serde(with = "crate::io::scorepair_v1")]
    pub schema: (),
    pub id: String,
    pub ground_truth: Vec<TargetTuple>,
    pub response: String,
}

/// Per-pair batch result, keyed by the request id.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchScore {
    pub id: String,
    #[serde(flatten)]
    pub outcome: ScoreOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ScoreOutcome {
    Scored(RewardBreakdown),
    Failed { error: String },
}

fn score_one(pair: &ScorePair) -> BatchScore {
    let outcome = match total_reward(&pair.response, &pair.ground_truth) {
        Ok(breakdown) => ScoreOutcome::Scored(breakdown),
        Err(e) => ScoreOutcome::Failed {
            error: e.to_string(),
        },
    };
    BatchScore {
        id: pair.id.clone(),
        outcome,
    }
}

/// Scores a batch; data-parallel under the `parallel` feature, with output
/// order always matching input order.
pub fn score_batch(pairs: &[ScorePair]) -> Vec<BatchScore> {
    crate::par::map_slice(pairs, score_one)
}

/// Sequential twin of [`score_batch`] (benchmark baseline).
pub fn score_batch_sequential(pairs: &[ScorePair]) -> Vec<BatchScore> {
    pairs.iter().map(score_one).collect()
}
