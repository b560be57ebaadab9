//! Compositional multi-image sample synthesis from the grounding pool.
//!
//! Two branches: [`inter`] combines unrelated images into distractor-rich
//! samples; [`intra`] builds correlated cross-view samples from a single
//! image. Both derive one RNG stream per sample from the master seed, so
//! generation is reproducible and per-sample work is order-independent.

pub mod inter;
pub mod intra;

use crate::geometry::GeometryError;
use crate::ingest::{normalize_label, GroundingInstance};
use crate::sample::MultiImageSample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("pool has {available} usable instances, need {needed}")]
    PoolTooSmall { needed: usize, available: usize },
    #[error("pool offers {available} distinct image references, need {needed}")]
    DistinctImagesExhausted { needed: usize, available: usize },
    #[error("no conflict-free query label in the drawn instance set")]
    NoConflictFreeLabel,
    #[error("sample {sample}: no conflict-free instance set after {attempts} redraws")]
    ConflictRetryExhausted { sample: usize, attempts: usize },
    #[error("instance {0} has no annotation with a unique label")]
    NoUnambiguousAnnotation(u64),
    #[error("crop sampling exhausted its retry budget")]
    CropSamplingExhausted,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("crop ratio range must satisfy 1 <= lo <= hi")]
    InvalidRatioRange,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Output of a dataset synthesis run.
#[derive(Debug, Clone)]
pub struct SynthReport {
    pub samples: Vec<MultiImageSample>,
    /// Instances consumed but unusable (e.g. no unambiguous annotation).
    pub skipped_instances: u64,
    /// Instance-set redraws forced by the query-label conflict rule.
    pub redraws: u64,
}

/// Independent RNG stream `stream` under `master`. Stream 0 drives pool
/// consumption order; sample `i` uses stream `i + 1`.
pub(crate) fn stream_rng(master: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

/// Distinct `(normalized, display)` labels of an instance in
/// first-occurrence order.
pub(crate) fn labels_with_display(instance: &GroundingInstance) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = Vec::new();
    for ann in &instance.annotations {
        let norm = normalize_label(&ann.label);
        if !out.iter().any(|(n, _)| *n == norm) {
            out.push((norm, ann.label.clone()));
        }
    }
    out
}
