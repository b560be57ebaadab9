//! Deterministic toolkit for multi-image grounding post-training data and
//! rewards.
//!
//! Builds compositional multi-image training samples from single-image
//! grounding annotations (distractor-rich inter-image samples and
//! correlated cross-view intra-image samples), scores structured
//! Think-before-Grounding responses with a rule-based spatial reward
//! (binary format validity plus source-aware set-wise IoU under optimal
//! per-image matching), and evaluates GRPO quantities over rollout groups.
//!
//! Everything seeded is reproducible: reruns with the same seed produce
//! byte-identical outputs, with or without the `parallel` feature.

pub mod geometry;
pub mod grpo;
pub mod harness;
pub mod ingest;
pub mod io;
pub mod materialize;
mod par;
pub mod parser;
pub mod reward;
pub mod sample;
pub mod synth;
pub mod template;
