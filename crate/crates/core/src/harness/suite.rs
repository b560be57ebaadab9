//! Seeded validation suite probing the reward's behavioral properties:
//! agreement with the exhaustive reference matcher, monotone degradation
//! under spatial jitter, zero credit for wrong attribution, the
//! cardinality penalty, and permutation invariance.
//!
//! The report is fully determined by its configuration; failures carry
//! reproducer case indices.

use crate::harness::perturb::{Perturbation, PerturbationSpec};
use crate::harness::synthetic;
use crate::reward::{self, reference};
use crate::synth::stream_rng;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Jitter magnitudes (grid units) of the degradation curve.
pub const JITTER_MAGNITUDES: [u32; 5] = [0, 20, 50, 100, 200];
/// Single-target samples per jitter magnitude.
pub const JITTER_SAMPLES: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteConfig {
    /// Case count for the oracle, cardinality, and permutation properties.
    pub cases: usize,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { cases: 500, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRepro {
    pub case: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub cases: usize,
    pub failures: Vec<FailureRepro>,
    pub pass: bool,
}

impl PropertyReport {
    fn new(cases: usize, failures: Vec<FailureRepro>) -> Self {
        Self {
            cases,
            pass: failures.is_empty(),
            failures,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JitterReport {
    pub magnitudes: Vec<u32>,
    pub mean_r_miou: Vec<f64>,
    pub samples: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub config: SuiteConfig,
    pub oracle: PropertyReport,
    pub jitter: JitterReport,
    pub wrong_index: PropertyReport,
    pub cardinality: PropertyReport,
    pub permutation: PropertyReport,
    pub overall_pass: bool,
}

fn oracle_property(cfg: &SuiteConfig) -> PropertyReport {
    let mut rng = stream_rng(cfg.seed, 1);
    let cases: Vec<(usize, _)> = (0..cfg.cases)
        .map(|i| (i, synthetic::random_scored_pair(&mut rng)))
        .collect();
    let failures: Vec<FailureRepro> = crate::par::map_collect(cases, |(case, (preds, gts))| {
        let (engine, _) = reward::r_miou(&preds, &gts).expect("ground truth is non-empty");
        let oracle = reference::brute_force_miou(&preds, &gts);
        if (engine - oracle).abs() > 1e-9 {
            Some(FailureRepro {
                case,
                detail: format!("engine {engine} vs oracle {oracle}"),
            })
        } else {
            None
        }
    })
    .into_iter()
    .flatten()
    .collect();
    PropertyReport::new(cfg.cases, failures)
}

fn jitter_property(cfg: &SuiteConfig) -> JitterReport {
    let mut rng = stream_rng(cfg.seed, 2);
    let cases: Vec<(Vec<crate::sample::TargetTuple>, u64)> = (0..JITTER_SAMPLES)
        .map(|_| (synthetic::random_single_target(&mut rng), rng.gen()))
        .collect();
    let mut means = Vec::with_capacity(JITTER_MAGNITUDES.len());
    for (step, &magnitude) in JITTER_MAGNITUDES.iter().enumerate() {
        let sum: f64 = cases
            .iter()
            .map(|(gts, case_seed)| {
                let spec = PerturbationSpec {
                    kind: Perturbation::BoxJitter { magnitude },
                    seed: case_seed.wrapping_add(step as u64),
                };
                let text = crate::harness::perturb::perturb_response(gts, 3, &spec)
                    .expect("single targets are non-empty");
                reward::total_reward(&text, gts)
                    .expect("non-empty ground truth")
                    .r_miou
            })
            .sum();
        means.push(sum / JITTER_SAMPLES as f64);
    }
    let pass = means.windows(2).all(|w| w[1] < w[0]);
    JitterReport {
        magnitudes: JITTER_MAGNITUDES.to_vec(),
        mean_r_miou: means,
        samples: JITTER_SAMPLES,
        pass,
    }
}

fn wrong_index_property(cfg: &SuiteConfig) -> PropertyReport {
    let mut rng = stream_rng(cfg.seed, 3);
    let mut failures = Vec::new();
    for case in 0..cfg.cases {
        let gts = synthetic::random_single_target(&mut rng);
        let spec = PerturbationSpec {
            kind: Perturbation::WrongIndex,
            seed: rng.gen(),
        };
        let text = crate::harness::perturb::perturb_response(&gts, 3, &spec)
            .expect("single targets are non-empty");
        let breakdown = reward::total_reward(&text, &gts).expect("non-empty ground truth");
        if breakdown.r_miou != 0.0 || breakdown.r_format != 1 {
            failures.push(FailureRepro {
                case,
                detail: format!(
                    "expected (0.0, 1), got ({}, {})",
                    breakdown.r_miou, breakdown.r_format
                ),
            });
        }
    }
    PropertyReport::new(cfg.cases, failures)
}

fn cardinality_property(cfg: &SuiteConfig) -> PropertyReport {
    let mut rng = stream_rng(cfg.seed, 4);
    let mut failures = Vec::new();
    for case in 0..cfg.cases {
        let gt_len = rng.gen_range(1..=4);
        let gts = synthetic::random_target_set(&mut rng, gt_len, 3);
        let mut preds = gts.clone();
        preds.push(gts[rng.gen_range(0..gts.len())].clone());
        let (score, _) = reward::r_miou(&preds, &gts).expect("non-empty ground truth");
        let expected = gts.len() as f64 / (gts.len() + 1) as f64;
        if score >= 1.0 || (score - expected).abs() > 1e-9 {
            failures.push(FailureRepro {
                case,
                detail: format!("expected {expected}, got {score}"),
            });
        }
    }
    PropertyReport::new(cfg.cases, failures)
}

fn permutation_property(cfg: &SuiteConfig) -> PropertyReport {
    let mut rng = stream_rng(cfg.seed, 5);
    let mut failures = Vec::new();
    for case in 0..cfg.cases {
        let (mut preds, mut gts) = synthetic::random_scored_pair(&mut rng);
        let (before, _) = reward::r_miou(&preds, &gts).expect("non-empty ground truth");
        preds.shuffle(&mut rng);
        gts.shuffle(&mut rng);
        let (after, _) = reward::r_miou(&preds, &gts).expect("non-empty ground truth");
        if (before - after).abs() > 1e-12 {
            failures.push(FailureRepro {
                case,
                detail: format!("{before} became {after} after reordering"),
            });
        }
    }
    PropertyReport::new(cfg.cases, failures)
}

/// Runs every property; deterministic for a given configuration.
pub fn run_reward_suite(cfg: &SuiteConfig) -> SuiteReport {
    let oracle = oracle_property(cfg);
    let jitter = jitter_property(cfg);
    let wrong_index = wrong_index_property(cfg);
    let cardinality = cardinality_property(cfg);
    let permutation = permutation_property(cfg);
    let overall_pass = oracle.pass
        && jitter.pass
        && wrong_index.pass
        && cardinality.pass
        && permutation.pass;
    SuiteReport {
        config: *cfg,
        oracle,
        jitter,
        wrong_index,
        cardinality,
        permutation,
        overall_pass,
    }
}
