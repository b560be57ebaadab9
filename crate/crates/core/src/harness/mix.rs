//! Mix planning and deterministic interleaving of the two branches.
//!
//! Planning follows the consumption arithmetic: every inter sample uses
//! `k` instances and every intra sample uses one, mixed 1:1, so a pool of
//! `p` instances yields `x = p / (k + 1)` samples per branch.

use crate::io;
use crate::sample::MultiImageSample;
use crate::template::Branch;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::Path;

use super::HarnessError;

/// How a pool is split into the two branches at a fixed 1:1 ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixPlan {
    pub pool_size: usize,
    pub k_inter: usize,
    /// The declared inter:intra mix ratio; always `[1, 1]`.
    pub ratio: [u32; 2],
    pub inter_samples: usize,
    pub intra_samples: usize,
    pub total_samples: usize,
    pub instances_consumed: usize,
}

/// Maximal 1:1 plan for a pool: the largest `x` with
/// `k * x + x <= pool_size`.
pub fn plan_mix(pool_size: usize, k_inter: usize) -> Result<MixPlan, HarnessError> {
    if k_inter == 0 {
        return Err(HarnessError::InvalidK);
    }
    let per_pair = k_inter + 1;
    let x = pool_size / per_pair;
    if x == 0 {
        return Err(HarnessError::PoolTooSmallForMix {
            needed: per_pair,
            got: pool_size,
        });
    }
    Ok(MixPlan {
        pool_size,
        k_inter,
        ratio: [1, 1],
        inter_samples: x,
        intra_samples: x,
        total_samples: 2 * x,
        instances_consumed: per_pair * x,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixSummary {
    pub inter: usize,
    pub intra: usize,
    pub total: usize,
}

fn validate_stream(path: &str, lines: &[String], expected: Branch) -> Result<Vec<String>, HarnessError> {
    let mut ids = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        let sample: MultiImageSample =
            serde_json::from_str(line).map_err(|e| HarnessError::BadSampleLine {
                path: path.to_string(),
                line: i + 1,
                detail: e.to_string(),
            })?;
        sample.validate().map_err(|e| HarnessError::BadSampleLine {
            path: path.to_string(),
            line: i + 1,
            detail: e.to_string(),
        })?;
        if sample.branch != expected {
            return Err(HarnessError::BranchMismatch {
                path: path.to_string(),
                expected,
                got: lines.len(),
            });
        }
        ids.push(sample.id);
    }
    Ok(ids)
}

/// Interleaves two validated sample streams into one seeded shuffle.
///
/// Input lines are emitted verbatim (the shuffle only permutes lines), so
/// reruns with the same seed are byte-identical. Branch counts are
/// preserved exactly; with `require_ratio`, both streams must be non-empty
/// and equal in size.
pub fn mix_streams(
    inter: (&str, Vec<String>),
    intra: (&str, Vec<String>),
    seed: u64,
    require_ratio: bool,
) -> Result<(Vec<String>, MixSummary), HarnessError> {
    let inter_ids = validate_stream(inter.0, &inter.1, Branch::Inter)?;
    let intra_ids = validate_stream(intra.0, &intra.1, Branch::Intra)?;
    let mut seen = HashSet::new();
    for id in inter_ids.iter().chain(intra_ids.iter()) {
        if !seen.insert(id.clone()) {
            return Err(HarnessError::DuplicateSampleId(id.clone()));
        }
    }
    if require_ratio && (inter.1.is_empty() || inter.1.len() != intra.1.len()) {
        return Err(HarnessError::UnbalancedStreams {
            inter: inter.1.len(),
            intra: intra.1.len(),
        });
    }
    let summary = MixSummary {
        inter: inter.1.len(),
        intra: intra.1.len(),
        total: inter.1.len() + intra.1.len(),
    };
    let mut lines: Vec<String> = inter.1;
    lines.extend(intra.1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    lines.shuffle(&mut rng);
    Ok((lines, summary))
}

/// File-level wrapper around [`mix_streams`].
pub fn mix_files(
    inter_path: &Path,
    intra_path: &Path,
    seed: u64,
    require_ratio: bool,
    out_path: &Path,
) -> Result<MixSummary, HarnessError> {
    let inter = io::read_lines(inter_path)?;
    let intra = io::read_lines(intra_path)?;
    let (lines, summary) = mix_streams(
        (&inter_path.display().to_string(), inter),
        (&intra_path.display().to_string(), intra),
        seed,
        require_ratio,
    )?;
    io::write_lines(out_path, &lines)?;
    Ok(summary)
}
