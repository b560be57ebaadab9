//! Numeric kernel for group-relative policy optimization: normalized
//! advantages, probability ratios, the clipped surrogate, and the KL
//! penalty estimator.
//!
//! The kernel computes values only; differentiation belongs to the
//! consuming trainer. Log-probabilities arrive pre-aggregated per
//! response, under the current, old, and reference policies.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GrpoError {
    #[error("group needs at least 2 rollouts, got {0}")]
    GroupTooSmall(usize),
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("group {id}: field lengths disagree ({detail})")]
    LengthMismatch { id: String, detail: String },
    #[error("invalid config: {0}")]
    InvalidConfig(&'static str),
}

/// One rollout: its scalar reward (nominally in `[0, 2]`) and the response
/// log-probability under the three policies involved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloutRecord {
    pub reward: f64,
    pub logp_current: f64,
    pub logp_old: f64,
    pub logp_ref: f64,
}

/// A group of rollouts for one query, normalized jointly.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutGroup {
    pub id: String,
    pub records: Vec<RolloutRecord>,
}

impl RolloutGroup {
    pub fn new(id: String, records: Vec<RolloutRecord>) -> Result<Self, GrpoError> {
        if records.len() < 2 {
            return Err(GrpoError::GroupTooSmall(records.len()));
        }
        Ok(Self { id, records })
    }
}

/// Kernel hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrpoConfig {
    /// Ratio clipping half-width; must be positive.
    pub epsilon: f64,
    /// KL penalty coefficient; must be non-negative.
    pub beta: f64,
    /// Log-ratio deltas are clamped to this magnitude before
    /// exponentiation; a numerical guard that leaves realistic inputs
    /// untouched.
    pub max_log_ratio: f64,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.2,
            beta: 0.01,
            max_log_ratio: 50.0,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<(), GrpoError> {
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(GrpoError::InvalidConfig("epsilon must be > 0"));
        }
        if !self.beta.is_finite() || self.beta < 0.0 {
            return Err(GrpoError::InvalidConfig("beta must be >= 0"));
        }
        if !self.max_log_ratio.is_finite() || self.max_log_ratio <= 0.0 {
            return Err(GrpoError::InvalidConfig("max_log_ratio must be > 0"));
        }
        Ok(())
    }
}

/// Group advantages, or the skip signal for zero-variance groups.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupAdvantages {
    /// Every rollout earned the same reward; the step carries no signal.
    Skip,
    Computed(Vec<f64>),
}

/// Normalizes rewards to zero-mean, unit population-std advantages.
///
/// Uses the population standard deviation (divide by G). Identical
/// rewards yield [`GroupAdvantages::Skip`] rather than a smoothed
/// division; no epsilon is folded into the denominator.
pub fn group_advantages(rewards: &[f64]) -> Result<GroupAdvantages, GrpoError> {
    if rewards.len() < 2 {
        return Err(GrpoError::GroupTooSmall(rewards.len()));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(GrpoError::NonFinite("reward"));
    }
    if rewards.iter().all(|&r| r == rewards[0]) {
        return Ok(GroupAdvantages::Skip);
    }
    let g = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / g;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / g;
    let std = var.sqrt();
    Ok(GroupAdvantages::Computed(
        rewards.iter().map(|r| (r - mean) / std).collect(),
    ))
}

/// `exp(logp_current - logp_old)`, evaluated in log space with the delta
/// clamped to `±max_abs_delta`.
pub fn prob_ratio(logp_current: f64, logp_old: f64, max_abs_delta: f64) -> Result<f64, GrpoError> {
    if !logp_current.is_finite() {
        return Err(GrpoError::NonFinite("logp_current"));
    }
    if !logp_old.is_finite() {
        return Err(GrpoError::NonFinite("logp_old"));
    }
    let delta = (logp_current - logp_old).clamp(-max_abs_delta, max_abs_delta);
    Ok(delta.exp())
}

/// Pessimistic clipped surrogate:
/// `min(ratio * adv, clamp(ratio, 1-eps, 1+eps) * adv)`.
pub fn clipped_term(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * advantage).min(clipped * advantage)
}

/// Estimator `u - log(u) - 1` with `u = exp(logp_ref - logp_current)`.
///
/// Computed via `exp_m1` so the result is non-negative for every finite
/// input and zero exactly when the two log-probabilities agree.
pub fn kl_estimate(logp_ref: f64, logp_current: f64) -> Result<f64, GrpoError> {
    if !logp_ref.is_finite() {
        return Err(GrpoError::NonFinite("logp_ref"));
    }
    if !logp_current.is_finite() {
        return Err(GrpoError::NonFinite("logp_current"));
    }
    let delta = logp_ref - logp_current;
    // u - log(u) - 1 == (exp(delta) - 1) - delta
    Ok((delta.exp_m1() - delta).max(0.0))
}

/// Per-rollout terms of an evaluated group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordTerms {
    pub advantage: f64,
    pub ratio: f64,
    pub kl: f64,
    pub clipped: f64,
    /// `clipped - beta * kl`; the group objective is the mean of these.
    pub contribution: f64,
}

/// Outcome of evaluating one group.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupOutcome {
    Skip,
    Evaluated(GroupEval),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupEval {
    pub objective: f64,
    pub records: Vec<RecordTerms>,
}

/// Evaluates the clipped objective contribution of one rollout group.
pub fn group_objective(group: &RolloutGroup, cfg: &GrpoConfig) -> Result<GroupOutcome, GrpoError> {
    cfg.validate()?;
    let rewards: Vec<f64> = group.records.iter().map(|r| r.reward).collect();
    let advantages = match group_advantages(&rewards)? {
        GroupAdvantages::Skip => return Ok(GroupOutcome::Skip),
        GroupAdvantages::Computed(a) => a,
    };
    let mut records = Vec::with_capacity(group.records.len());
    for (rec, &advantage) in group.records.iter().zip(&advantages) {
        let ratio = prob_ratio(rec.logp_current, rec.logp_old, cfg.max_log_ratio)?;
        let kl = kl_estimate(rec.logp_ref, rec.logp_current)?;
        let clipped = clipped_term(ratio, advantage, cfg.epsilon);
        records.push(RecordTerms {
            advantage,
            ratio,
            kl,
            clipped,
            contribution: clipped - cfg.beta * kl,
        });
    }
    let objective = records.iter().map(|r| r.contribution).sum::<f64>() / records.len() as f64;
    Ok(GroupOutcome::Evaluated(GroupEval { objective, records }))
}

/// One group per line in a groups file (`group/v1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupLine {
    #[serde(with = "crate::io::group_v1")]
    pub schema: (),
    pub id: String,
    pub rewards: Vec<f64>,
    pub logp_current: Vec<f64>,
    pub logp_old: Vec<f64>,
    pub logp_ref: Vec<f64>,
}

impl GroupLine {
    pub fn into_group(self) -> Result<RolloutGroup, GrpoError> {
        let n = self.rewards.len();
        if self.logp_current.len() != n || self.logp_old.len() != n || self.logp_ref.len() != n {
            return Err(GrpoError::LengthMismatch {
                id: self.id,
                detail: format!(
                    "rewards {n}, logp_current {}, logp_old {}, logp_ref {}",
                    self.logp_current.len(),
                    self.logp_old.len(),
                    self.logp_ref.len()
                ),
            });
        }
        let records = (0..n)
            .map(|i| RolloutRecord {
                reward: self.rewards[i],
                logp_current: self.logp_current[i],
                logp_old: self.logp_old[i],
                logp_ref: self.logp_ref[i],
            })
            .collect();
        RolloutGroup::new(self.id, records)
    }
}

/// Per-group evaluation line emitted by the batch evaluator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEvalLine {
    pub id: String,
    pub skip: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub objective: Option<f64>,
    pub advantages: Vec<f64>,
    pub ratios: Vec<f64>,
    pub kl: Vec<f64>,
    pub clipped: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

/// Evaluates a batch of group lines; one output line per input, in order.
pub fn eval_groups(lines: Vec<GroupLine>, cfg: &GrpoConfig) -> Vec<GroupEvalLine> {
    crate::par::map_collect(lines, |line| {
        let id = line.id.clone();
        let outcome = line.into_group().and_then(|g| group_objective(&g, cfg));
        match outcome {
            Ok(GroupOutcome::Skip) => GroupEvalLine {
                id,
                skip: true,
                objective: None,
                advantages: Vec::new(),
                ratios: Vec::new(),
                kl: Vec::new(),
                clipped: Vec::new(),
                error: None,
            },
            Ok(GroupOutcome::Evaluated(eval)) => GroupEvalLine {
                id,
                skip: false,
                objective: Some(eval.objective),
                advantages: eval.records.iter().map(|r| r.advantage).collect(),
                ratios: eval.records.iter().map(|r| r.ratio).collect(),
                kl: eval.records.iter().map(|r| r.kl).collect(),
                clipped: eval.records.iter().map(|r| r.clipped).collect(),
                error: None,
            },
            Err(e) => GroupEvalLine {
                id,
                skip: false,
                objective: None,
                advantages: Vec::new(),
                ratios: Vec::new(),
                kl: Vec::new(),
                clipped: Vec::new(),
                error: Some(e.to_string()),
            },
        }
    })
}
