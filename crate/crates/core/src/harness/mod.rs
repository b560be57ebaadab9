//! Dataset mixing, prompt rendering, perturbation-based reward
//! validation, the streaming scoring protocol, and dataset statistics.

pub mod mix;
pub mod perturb;
pub mod prompt;
pub mod serve;
pub mod stats;
pub mod suite;
pub mod synthetic;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("file: {0}")]
    Jsonl(#[from] crate::io::JsonlError),
    #[error("pool must hold at least {needed} instances for one sample of each branch, got {got}")]
    PoolTooSmallForMix { needed: usize, got: usize },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("{path}, line {line}: {detail}")]
    BadSampleLine {
        path: String,
        line: usize,
        detail: String,
    },
    #[error("{path} contains {got} samples but every line must be branch {expected}")]
    BranchMismatch {
        path: String,
        expected: crate::template::Branch,
        got: usize,
    },
    #[error("duplicate sample id {0} across the mixed streams")]
    DuplicateSampleId(String),
    #[error("streams are unbalanced (inter {inter}, intra {intra}) and the 1:1 ratio is enforced")]
    UnbalancedStreams { inter: usize, intra: usize },
    #[error("perturbation needs at least {needed} images, sample has {got}")]
    NeedMoreImages { needed: usize, got: usize },
    #[error("ground-truth set must be non-empty")]
    EmptyTargets,
    #[error("stats: {0}")]
    Stats(String),
}
