//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured numbers (visible with `--nocapture`).
//!
//! Run with `cargo test -p multiground-cli --test acceptance`.

use multiground_core::grpo::{
    group_advantages, kl_estimate, GroupAdvantages,
};
use multiground_core::harness::{mix, suite, synthetic};
use multiground_core::parser::{parse_response, ViolationCode, VIOLATION_CODES};
use multiground_core::reward::{self, reference, score_batch};
use multiground_core::sample::ViewKind;
use multiground_core::synth::intra;
use multiground_core::template::TemplatePool;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

/// 1. The exact matcher agrees with exhaustive enumeration on 2,000
///    seeded random pairs (|C|, |S| <= 6, up to 3 image indices) within
///    1e-9, in under 10 seconds.
#[test]
fn criterion_1_reward_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC1);
    let mut max_delta = 0.0f64;
    for case in 0..2_000 {
        let (preds, gts) = synthetic::random_scored_pair(&mut rng);
        assert!(preds.len() <= 6 && (1..=6).contains(&gts.len()));
        let (engine, _) = reward::r_miou(&preds, &gts).expect("non-empty ground truth");
        let oracle = reference::brute_force_miou(&preds, &gts);
        let delta = (engine - oracle).abs();
        assert!(
            delta <= 1e-9,
            "case {case}: engine {engine} vs oracle {oracle} (delta {delta})"
        );
        max_delta = max_delta.max(delta);
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "oracle sweep took {elapsed:?}, budget is 10s"
    );
    println!(
        "ACCEPTANCE 1 (reward oracle equivalence): PASS - 2000 cases, max |delta| {max_delta:.2e}, {elapsed:?}"
    );
}

/// 2. The worked golden vector scores exactly 0.5.
#[test]
fn criterion_2_reward_golden_vector() {
    let t = |img_idx: usize, b: [i64; 4]| multiground_core::sample::TargetTuple {
        img_idx,
        label: "x".into(),
        bbox_2d: multiground_core::geometry::NormBox::new(b[0], b[1], b[2], b[3]).unwrap(),
    };
    let c = vec![t(0, [0, 0, 100, 100]), t(1, [0, 0, 100, 100])];
    let s = vec![t(0, [0, 0, 100, 100]), t(0, [50, 0, 150, 100])];
    let (score, detail) = reward::r_miou(&c, &s).unwrap();
    assert_eq!(score, 0.5, "golden vector must score exactly 0.5");
    assert_eq!(detail.matches.len(), 1);
    println!("ACCEPTANCE 2 (reward golden vector): PASS - r_miou == 0.5 exactly");
}

/// 3. The checked-in malformed/valid response corpus (>= 40 entries,
///    every violation code >= 3x) reproduces with zero mismatches.
#[test]
fn criterion_3_format_reward_exactness() {
    #[derive(serde::Deserialize)]
    struct Entry {
        name: String,
        valid: bool,
        codes: Vec<ViolationCode>,
        response: String,
    }
    let corpus = include_str!("data/format_corpus.jsonl");
    let entries: Vec<Entry> = corpus
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("corpus entries are valid JSON"))
        .collect();
    assert!(entries.len() >= 40, "corpus has only {} entries", entries.len());

    let mut coverage: HashMap<ViolationCode, usize> = HashMap::new();
    let gts = vec![multiground_core::sample::TargetTuple {
        img_idx: 0,
        label: "cat".into(),
        bbox_2d: multiground_core::geometry::NormBox::new(100, 100, 300, 400).unwrap(),
    }];
    for entry in &entries {
        let parsed = parse_response(&entry.response);
        assert_eq!(
            parsed.violations, entry.codes,
            "{}: expected {:?}, got {:?}",
            entry.name, entry.codes, parsed.violations
        );
        let breakdown = reward::total_reward(&entry.response, &gts).unwrap();
        assert_eq!(
            breakdown.r_format,
            u8::from(entry.valid),
            "{}: format verdict mismatch",
            entry.name
        );
        for code in &entry.codes {
            *coverage.entry(*code).or_default() += 1;
        }
    }
    for code in VIOLATION_CODES {
        let n = coverage.get(&code).copied().unwrap_or(0);
        assert!(n >= 3, "code {code:?} appears only {n} times in the corpus");
    }
    println!(
        "ACCEPTANCE 3 (format reward exactness): PASS - {} corpus entries, zero mismatches",
        entries.len()
    );
}

/// 4. Mean spatial reward strictly decreases along the jitter-magnitude
///    grid over 500 seeded single-target samples; wrong-index
///    perturbations score exactly zero spatial reward.
#[test]
fn criterion_4_monotone_degradation() {
    let report = suite::run_reward_suite(&suite::SuiteConfig { cases: 500, seed: 0xACC4 });
    assert_eq!(report.jitter.samples, 500);
    assert_eq!(report.jitter.magnitudes, vec![0, 20, 50, 100, 200]);
    assert!(
        report.jitter.pass,
        "jitter means not strictly decreasing: {:?}",
        report.jitter.mean_r_miou
    );
    assert_eq!(report.jitter.mean_r_miou[0], 1.0);
    assert!(
        report.wrong_index.pass,
        "wrong-index failures: {:?}",
        report.wrong_index.failures.first()
    );
    println!(
        "ACCEPTANCE 4 (monotone degradation): PASS - means {:?}, wrong-index exactly 0 on {} samples",
        report.jitter.mean_r_miou, report.wrong_index.cases
    );
}

/// 5. Mix-plan arithmetic: 72,000 instances at k=3 and a 1:1 mix yield
///    exactly 18,000 + 18,000 = 36,000 samples.
#[test]
fn criterion_5_mix_plan_arithmetic() {
    let plan = mix::plan_mix(72_000, 3).unwrap();
    assert_eq!(plan.inter_samples, 18_000);
    assert_eq!(plan.intra_samples, 18_000);
    assert_eq!(plan.total_samples, 36_000);
    assert_eq!(plan.instances_consumed, 72_000);
    println!("ACCEPTANCE 5 (mix-plan arithmetic): PASS - 72,000 instances -> 18,000 + 18,000");
}

/// 6. Over 10,000 seeded intra samples: sampled ratios stay inside their
///    bands, the target is fully visible in every crop, and the crop
///    round-trip error is at most one pixel per edge - in 100% of cases.
#[test]
fn criterion_6_crop_geometry() {
    let n = 10_000usize;
    let pool = synthetic::synthetic_pool(n + 64, 0xACC6);
    let templates = TemplatePool::builtin();
    let report = intra::synth_intra_dataset(&pool, n, &templates, 0xACC6).unwrap();
    assert_eq!(report.samples.len(), n);

    let mut max_edge_err = 0.0f64;
    for sample in &report.samples {
        let geom = sample.geometry.as_ref().expect("intra samples carry geometry");
        let area = |kind: ViewKind| {
            geom.views
                .iter()
                .find(|v| v.kind == kind)
                .and_then(|v| v.crop)
                .expect("cropped views carry regions")
                .area()
        };
        assert!(
            area(ViewKind::Context) > area(ViewKind::Focus),
            "{}: context crop not strictly larger",
            sample.id
        );
        for view in &geom.views {
            match view.kind {
                ViewKind::Original => assert!(view.crop.is_none() && view.ratio.is_none()),
                ViewKind::Focus => {
                    let r = view.ratio.unwrap();
                    assert!((1.2..=1.5).contains(&r), "focus ratio {r} out of band");
                }
                ViewKind::Context => {
                    let r = view.ratio.unwrap();
                    assert!((1.8..=2.5).contains(&r), "context ratio {r} out of band");
                }
            }
            if let Some(crop) = &view.crop {
                assert!(
                    crop.contains(&geom.pixel_box),
                    "{}: target not fully visible",
                    sample.id
                );
                let back = crop.to_parent_px(&view.bbox_2d);
                for (got, want) in back
                    .as_array()
                    .iter()
                    .zip(geom.pixel_box.as_array().iter())
                {
                    let err = (got - want).abs();
                    assert!(
                        err <= 1.0 + 1e-9,
                        "{}: round-trip edge error {err}",
                        sample.id
                    );
                    max_edge_err = max_edge_err.max(err);
                }
            }
        }
    }
    println!(
        "ACCEPTANCE 6 (crop geometry): PASS - {n} samples, ratios in band, 100% visibility, max edge error {max_edge_err:.3}px"
    );
}

/// 7. GRPO kernel: advantage normalization on 1,000 non-degenerate
///    groups, the skip rule on constant groups, KL non-negativity over
///    10^6 random inputs with equality only at u = 1, and the two KL
///    golden values.
#[test]
fn criterion_7_grpo_kernel() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC7);
    for case in 0..1_000 {
        let rewards: Vec<f64> = loop {
            let r: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..=2.0)).collect();
            if r.iter().any(|&v| v != r[0]) {
                break r;
            }
        };
        match group_advantages(&rewards).unwrap() {
            GroupAdvantages::Computed(a) => {
                let g = a.len() as f64;
                let mean = a.iter().sum::<f64>() / g;
                let std = (a.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / g).sqrt();
                assert!(mean.abs() <= 1e-12, "case {case}: mean {mean}");
                assert!((std - 1.0).abs() <= 1e-9, "case {case}: std {std}");
            }
            GroupAdvantages::Skip => panic!("case {case}: non-degenerate group skipped"),
        }
    }
    for case in 0..100 {
        let level = rng.gen_range(0.0..=2.0);
        let rewards = vec![level; 8];
        assert!(
            matches!(group_advantages(&rewards).unwrap(), GroupAdvantages::Skip),
            "case {case}: constant group not skipped"
        );
    }
    for _ in 0..1_000_000 {
        let lr = rng.gen_range(-50.0..0.0);
        let lc = rng.gen_range(-50.0..0.0);
        let kl = kl_estimate(lr, lc).unwrap();
        assert!(kl >= 0.0);
        if (lr - lc).abs() > 1e-9 {
            assert!(kl > 0.0, "kl zero at u != 1 (lr {lr}, lc {lc})");
        }
    }
    assert_eq!(kl_estimate(-3.25, -3.25).unwrap(), 0.0);
    let up = kl_estimate(2f64.ln() - 1.0, -1.0).unwrap();
    let down = kl_estimate(-(2f64.ln()) - 1.0, -1.0).unwrap();
    assert!((up - 0.30685).abs() <= 1e-5, "u=2 golden: {up}");
    assert!((down - 0.19315).abs() <= 1e-5, "u=0.5 golden: {down}");
    println!(
        "ACCEPTANCE 7 (grpo kernel): PASS - 1000 groups normalized, skip rule holds, KL >= 0 on 1e6 inputs, goldens {up:.5}/{down:.5}"
    );
}

fn run_cli(args: &[&str], dir: &Path) -> (String, String) {
    let output = Command::new(env!("CARGO_BIN_EXE_multiground"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "multiground {args:?} failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    (
        String::from_utf8_lossy(&output.stdout).into_owned(),
        String::from_utf8_lossy(&output.stderr).into_owned(),
    )
}

fn write_source_records(path: &Path, n: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    for i in 0..n {
        let w = rng.gen_range(640..=1200u32);
        let h = rng.gen_range(640..=1200u32);
        let anns: Vec<serde_json::Value> = (0..rng.gen_range(1..=3))
            .map(|j| {
                let bw = rng.gen_range(50..=350).min(w as i64 - 2);
                let bh = rng.gen_range(50..=350).min(h as i64 - 2);
                let x1 = rng.gen_range(0..=(w as i64 - bw));
                let y1 = rng.gen_range(0..=(h as i64 - bh));
                serde_json::json!({
                    "label": format!("object-{i}-{j}"),
                    "box": [x1, y1, bw, bh],
                    "convention": "xywh-pixel",
                })
            })
            .collect();
        lines.push(
            serde_json::json!({
                "dataset": "synthetic",
                "image": format!("img-{i:05}.png"),
                "width": w,
                "height": h,
                "annotations": anns,
            })
            .to_string(),
        );
    }
    std::fs::write(path, lines.join("\n") + "\n").unwrap();
}

/// 8. Every synthesis and mixing command, rerun with the same seed,
///    produces byte-identical output files (two full runs compared).
#[test]
fn criterion_8_seeded_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write_source_records(&root.join("records.jsonl"), 160, 0xACC8);

    let produce = |tag: &str| -> Vec<(String, Vec<u8>)> {
        let pool = format!("pool-{tag}.jsonl");
        let inter = format!("inter-{tag}.jsonl");
        let intra = format!("intra-{tag}.jsonl");
        let train = format!("train-{tag}.jsonl");
        run_cli(
            &["ingest", "--input", "records.jsonl", "--min-edge", "640", "--out", &pool],
            root,
        );
        run_cli(
            &["synth", "inter", "--pool", &pool, "--n", "30", "--k", "3", "--seed", "77", "--out", &inter],
            root,
        );
        run_cli(
            &["synth", "intra", "--pool", &pool, "--n", "30", "--seed", "77", "--out", &intra],
            root,
        );
        run_cli(
            &["mix", "--inter", &inter, "--intra", &intra, "--seed", "77", "--out", &train],
            root,
        );
        [pool, inter, intra, train]
            .into_iter()
            .map(|name| {
                let bytes = std::fs::read(root.join(&name)).unwrap();
                (name, bytes)
            })
            .collect()
    };

    let first = produce("a");
    let second = produce("b");
    for ((name_a, bytes_a), (name_b, bytes_b)) in first.iter().zip(second.iter()) {
        assert!(!bytes_a.is_empty(), "{name_a} is empty");
        assert_eq!(
            bytes_a, bytes_b,
            "{name_a} and {name_b} differ across reruns"
        );
    }
    println!(
        "ACCEPTANCE 8 (seeded determinism): PASS - ingest/synth/mix byte-identical across two runs"
    );
}

/// 9. Batch scoring of 10,000 synthetic pairs completes in under 5
///    seconds.
#[test]
fn criterion_9_throughput_sanity() {
    let pairs = synthetic::synthetic_score_pairs(10_000, 0xACC9);
    let start = Instant::now();
    let scores = score_batch(&pairs);
    let elapsed = start.elapsed();
    assert_eq!(scores.len(), 10_000);
    assert!(
        elapsed.as_secs_f64() < 5.0,
        "scoring 10k pairs took {elapsed:?}, budget is 5s"
    );
    println!(
        "ACCEPTANCE 9 (throughput sanity): PASS - 10,000 pairs in {elapsed:?}"
    );
}
