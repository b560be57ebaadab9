//! Dataset statistics over pool or sample files.

use super::mix::{plan_mix, MixPlan};
use super::HarnessError;
use crate::ingest::{normalize_label, GroundingInstance};
use crate::io;
use crate::sample::MultiImageSample;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StatsReport {
    Pool(PoolStats),
    Samples(SampleStats),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolStats {
    pub instances: usize,
    pub annotations: usize,
    pub distinct_labels: usize,
    pub min_width: u32,
    pub max_width: u32,
    pub min_height: u32,
    pub max_height: u32,
    pub datasets: BTreeMap<String, usize>,
    /// The 1:1 mix this pool supports at the default k of 3, if any.
    pub mix_plan_k3: Option<MixPlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub samples: usize,
    pub branches: BTreeMap<String, usize>,
    pub slots_histogram: BTreeMap<usize, usize>,
    pub targets_histogram: BTreeMap<usize, usize>,
    pub template_usage: BTreeMap<String, usize>,
    pub distinct_labels: usize,
}

fn pool_stats(instances: &[GroundingInstance]) -> PoolStats {
    let mut labels = BTreeSet::new();
    let mut datasets: BTreeMap<String, usize> = BTreeMap::new();
    let mut annotations = 0usize;
    let (mut min_w, mut max_w, mut min_h, mut max_h) = (u32::MAX, 0, u32::MAX, 0);
    for inst in instances {
        annotations += inst.annotations.len();
        for ann in &inst.annotations {
            labels.insert(normalize_label(&ann.label));
        }
        *datasets.entry(inst.dataset.clone()).or_default() += 1;
        min_w = min_w.min(inst.dims.width);
        max_w = max_w.max(inst.dims.width);
        min_h = min_h.min(inst.dims.height);
        max_h = max_h.max(inst.dims.height);
    }
    PoolStats {
        instances: instances.len(),
        annotations,
        distinct_labels: labels.len(),
        min_width: if instances.is_empty() { 0 } else { min_w },
        max_width: max_w,
        min_height: if instances.is_empty() { 0 } else { min_h },
        max_height: max_h,
        datasets,
        mix_plan_k3: plan_mix(instances.len(), 3).ok(),
    }
}

fn sample_stats(samples: &[MultiImageSample]) -> SampleStats {
    let mut branches: BTreeMap<String, usize> = BTreeMap::new();
    let mut slots_histogram: BTreeMap<usize, usize> = BTreeMap::new();
    let mut targets_histogram: BTreeMap<usize, usize> = BTreeMap::new();
    let mut template_usage: BTreeMap<String, usize> = BTreeMap::new();
    let mut labels = BTreeSet::new();
    for s in samples {
        *branches.entry(s.branch.to_string()).or_default() += 1;
        *slots_histogram.entry(s.slots.len()).or_default() += 1;
        *targets_histogram.entry(s.targets.len()).or_default() += 1;
        *template_usage.entry(s.template.clone()).or_default() += 1;
        for t in &s.targets {
            labels.insert(normalize_label(&t.label));
        }
    }
    SampleStats {
        samples: samples.len(),
        branches,
        slots_histogram,
        targets_histogram,
        template_usage,
        distinct_labels: labels.len(),
    }
}

/// Computes statistics for a pool or sample file, dispatching on the
/// schema tag of the first line.
pub fn stats_for_file(path: &Path) -> Result<StatsReport, HarnessError> {
    let lines = io::read_lines(path)?;
    let first = lines
        .first()
        .ok_or_else(|| HarnessError::Stats("file is empty".into()))?;
    let probe: serde_json::Value = serde_json::from_str(first)
        .map_err(|e| HarnessError::Stats(format!("line 1 unparseable: {e}")))?;
    match probe.get("schema").and_then(|s| s.as_str()) {
        Some(io::pool_v1::TAG) => {
            let instances: Vec<GroundingInstance> = io::read_jsonl(path)?;
            Ok(StatsReport::Pool(pool_stats(&instances)))
        }
        Some(io::sample_v1::TAG) => {
            let samples: Vec<MultiImageSample> = io::read_jsonl(path)?;
            Ok(StatsReport::Samples(sample_stats(&samples)))
        }
        other => Err(HarnessError::Stats(format!(
            "unrecognized schema tag {other:?}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::synthetic;
    use crate::template::Branch;

    #[test]
    fn pool_stats_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pool.jsonl");
        synthetic::synthetic_pool(8, 1).save(&path).unwrap();
        match stats_for_file(&path).unwrap() {
            StatsReport::Pool(stats) => {
                assert_eq!(stats.instances, 8);
                assert!(stats.min_width >= 640);
                assert_eq!(stats.mix_plan_k3.unwrap().total_samples, 4);
            }
            other => panic!("expected pool stats, got {other:?}"),
        }
    }

    #[test]
    fn sample_stats_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("samples.jsonl");
        let samples = synthetic::synthetic_samples(Branch::Intra, 4, 2);
        io::write_jsonl(&path, samples.iter()).unwrap();
        match stats_for_file(&path).unwrap() {
            StatsReport::Samples(stats) => {
                assert_eq!(stats.samples, 4);
                assert_eq!(stats.branches.get("intra"), Some(&4));
                assert_eq!(stats.slots_histogram.get(&3), Some(&4));
            }
            other => panic!("expected sample stats, got {other:?}"),
        }
    }

    #[test]
    fn stats_rejects_unknown_schema() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("odd.jsonl");
        std::fs::write(&path, "{\"schema\":\"other/v9\"}\n").unwrap();
        assert!(matches!(
            stats_for_file(&path),
            Err(HarnessError::Stats(_))
        ));
    }
}
