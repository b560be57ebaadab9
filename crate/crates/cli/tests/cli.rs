//! End-to-end tests of the command-line surface.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Command, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_multiground"))
}

fn run_ok(args: &[&str], dir: &Path) -> String {
    let output = bin().args(args).current_dir(dir).output().expect("spawn");
    assert!(
        output.status.success(),
        "multiground {args:?} failed:\n{}",
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn run_err(args: &[&str], dir: &Path) -> String {
    let output = bin().args(args).current_dir(dir).output().expect("spawn");
    assert!(!output.status.success(), "multiground {args:?} unexpectedly succeeded");
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn write_records(path: &Path, n: usize) {
    let mut lines = Vec::new();
    for i in 0..n {
        let label_a = format!("object-{i}-a");
        let label_b = format!("object-{i}-b");
        lines.push(
            serde_json::json!({
                "dataset": "synthetic",
                "image": format!("img-{i:04}.png"),
                "width": 800 + (i % 5) * 64,
                "height": 720 + (i % 7) * 48,
                "annotations": [
                    {"label": label_a, "box": [40 + i as i64, 60, 220, 180], "convention": "xywh-pixel"},
                    {"label": label_b, "box": [300, 320, 180, 150], "convention": "xywh-pixel"},
                ],
            })
            .to_string(),
        );
    }
    std::fs::write(path, lines.join("\n") + "\n").unwrap();
}

#[test]
fn pipeline_ingest_synth_mix_score() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write_records(&root.join("records.jsonl"), 40);

    let report = run_ok(
        &["ingest", "--input", "records.jsonl", "--out", "pool.jsonl"],
        root,
    );
    let report: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(report["kept"], 40);

    run_ok(
        &["synth", "inter", "--pool", "pool.jsonl", "--n", "8", "--seed", "3", "--out", "inter.jsonl"],
        root,
    );
    run_ok(
        &["synth", "intra", "--pool", "pool.jsonl", "--n", "8", "--seed", "3", "--out", "intra.jsonl"],
        root,
    );
    run_ok(
        &["mix", "--inter", "inter.jsonl", "--intra", "intra.jsonl", "--seed", "3", "--out", "train.jsonl"],
        root,
    );

    // Build scoring pairs answering every sample perfectly.
    let mut pairs = Vec::new();
    for line in std::fs::read_to_string(root.join("train.jsonl")).unwrap().lines() {
        let sample: serde_json::Value = serde_json::from_str(line).unwrap();
        let answer = serde_json::to_string(&sample["targets"]).unwrap();
        pairs.push(
            serde_json::json!({
                "schema": "scorepair/v1",
                "id": sample["id"],
                "ground_truth": sample["targets"],
                "response": format!("<think>checking each image</think><answer>{answer}</answer>"),
            })
            .to_string(),
        );
    }
    std::fs::write(root.join("pairs.jsonl"), pairs.join("\n") + "\n").unwrap();

    let stdout = run_ok(&["score", "--pairs", "pairs.jsonl"], root);
    let scores: Vec<serde_json::Value> = stdout
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(scores.len(), 16);
    for s in &scores {
        assert_eq!(s["total"], 2.0, "sample {} not perfect", s["id"]);
    }

    let stats = run_ok(&["stats", "--input", "train.jsonl"], root);
    let stats: serde_json::Value = serde_json::from_str(&stats).unwrap();
    assert_eq!(stats["kind"], "samples");
    assert_eq!(stats["branches"]["inter"], 8);
    assert_eq!(stats["branches"]["intra"], 8);
}

#[test]
fn stats_reports_pool_mix_plan() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write_records(&root.join("records.jsonl"), 9);
    run_ok(
        &["ingest", "--input", "records.jsonl", "--out", "pool.jsonl"],
        root,
    );
    let stats = run_ok(&["stats", "--input", "pool.jsonl"], root);
    let stats: serde_json::Value = serde_json::from_str(&stats).unwrap();
    assert_eq!(stats["kind"], "pool");
    assert_eq!(stats["instances"], 9);
    assert_eq!(stats["mix_plan_k3"]["total_samples"], 4);
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write_records(&root.join("records.jsonl"), 6);
    // min_edge 4000 from config drops everything.
    std::fs::write(root.join("cfg.json"), "{\"min_edge\": 4000}").unwrap();
    let report = run_ok(
        &["ingest", "--input", "records.jsonl", "--config", "cfg.json", "--out", "pool.jsonl"],
        root,
    );
    let report: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(report["kept"], 0);
    assert_eq!(report["dropped_below_min_edge"], 6);
    // An explicit flag overrides the config.
    let report = run_ok(
        &["ingest", "--input", "records.jsonl", "--config", "cfg.json", "--min-edge", "0", "--out", "pool.jsonl"],
        root,
    );
    let report: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(report["kept"], 6);
}

#[test]
fn grpo_eval_golden_output() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let ln2 = std::f64::consts::LN_2;
    let lines = [
        serde_json::json!({
            "schema": "group/v1",
            "id": "golden",
            "rewards": [0.0, 1.0],
            "logp_current": [-1.0, -1.0],
            "logp_old": [-1.0, -1.0],
            "logp_ref": [ln2 - 1.0, ln2 - 1.0],
        }),
        serde_json::json!({
            "schema": "group/v1",
            "id": "flat",
            "rewards": [1.5, 1.5, 1.5],
            "logp_current": [-1.0, -1.0, -1.0],
            "logp_old": [-1.0, -1.0, -1.0],
            "logp_ref": [-1.0, -1.0, -1.0],
        }),
    ];
    std::fs::write(
        root.join("groups.jsonl"),
        lines.map(|l| l.to_string()).join("\n") + "\n",
    )
    .unwrap();
    let stdout = run_ok(
        &["grpo-eval", "--groups", "groups.jsonl", "--epsilon", "0.2", "--beta", "0.01"],
        root,
    );
    let evals: Vec<serde_json::Value> = stdout
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(evals.len(), 2);
    let objective = evals[0]["objective"].as_f64().unwrap();
    assert!((objective - (-0.0030685)).abs() < 1e-6, "objective {objective}");
    assert_eq!(evals[0]["advantages"][0], -1.0);
    assert_eq!(evals[0]["advantages"][1], 1.0);
    assert_eq!(evals[1]["skip"], true);
}

#[test]
fn serve_stdio_round_trip() {
    let request = serde_json::json!({
        "id": "r1",
        "ground_truth": [{"img_idx": 0, "label": "cat", "bbox_2d": [10, 10, 200, 200]}],
        "response_text": "<think>t</think><answer>{\"img_idx\": 0, \"label\": \"cat\", \"bbox_2d\": [10, 10, 200, 200]}</answer>",
        "num_images": 3,
    })
    .to_string();
    let mut child = bin()
        .arg("serve")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    {
        let mut stdin = child.stdin.take().unwrap();
        stdin.write_all(request.as_bytes()).unwrap();
        stdin.write_all(b"\nnot json\n").unwrap();
    }
    let output = child.wait_with_output().unwrap();
    assert!(output.status.success());
    let lines: Vec<serde_json::Value> = output
        .stdout
        .lines()
        .map(|l| serde_json::from_str(&l.unwrap()).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["id"], "r1");
    assert_eq!(lines[0]["total"], 2.0);
    assert_eq!(lines[1]["line"], 2);
    assert!(lines[1]["error"].is_string());
}

#[test]
fn serve_socket_round_trip() {
    use std::os::unix::net::UnixStream;
    let dir = tempfile::tempdir().unwrap();
    let sock = dir.path().join("scoring.sock");
    let mut child = bin()
        .args(["serve", "--socket", sock.to_str().unwrap()])
        .stderr(Stdio::null())
        .spawn()
        .unwrap();

    let mut stream = None;
    for _ in 0..100 {
        if let Ok(s) = UnixStream::connect(&sock) {
            stream = Some(s);
            break;
        }
        std::thread::sleep(std::time::Duration::from_millis(50));
    }
    let stream = stream.expect("socket came up");
    let request = serde_json::json!({
        "id": 42,
        "ground_truth": [{"img_idx": 1, "label": "dog", "bbox_2d": [0, 0, 500, 500]}],
        "response_text": "<think>t</think><answer>[]</answer>",
    })
    .to_string();
    (&stream).write_all((request + "\n").as_bytes()).unwrap();
    let mut reader = BufReader::new(&stream);
    let mut reply = String::new();
    reader.read_line(&mut reply).unwrap();
    let reply: serde_json::Value = serde_json::from_str(&reply).unwrap();
    assert_eq!(reply["id"], 42);
    assert_eq!(reply["r_format"], 1);
    assert_eq!(reply["r_miou"], 0.0);

    child.kill().unwrap();
    child.wait().unwrap();
}

#[test]
fn simulate_writes_deterministic_report() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    run_ok(
        &["simulate", "--cases", "40", "--seed", "11", "--out", "report-a.json"],
        root,
    );
    run_ok(
        &["simulate", "--cases", "40", "--seed", "11", "--out", "report-b.json"],
        root,
    );
    let a = std::fs::read(root.join("report-a.json")).unwrap();
    let b = std::fs::read(root.join("report-b.json")).unwrap();
    assert_eq!(a, b);
    let report: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(report["overall_pass"], true);
}

#[test]
fn materialize_writes_crops() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let images = root.join("images");
    std::fs::create_dir_all(&images).unwrap();

    // One 700x680 source image; the record's single annotation seeds the
    // intra views.
    image::RgbImage::from_fn(700, 680, |x, y| {
        image::Rgb([(x % 256) as u8, (y % 256) as u8, 0])
    })
    .save(images.join("img-0000.png"))
    .unwrap();
    std::fs::write(
        root.join("records.jsonl"),
        serde_json::json!({
            "dataset": "synthetic",
            "image": "img-0000.png",
            "width": 700,
            "height": 680,
            "annotations": [
                {"label": "swatch", "box": [200, 180, 180, 220], "convention": "xywh-pixel"},
            ],
        })
        .to_string()
            + "\n",
    )
    .unwrap();

    run_ok(
        &["ingest", "--input", "records.jsonl", "--min-edge", "0", "--out", "pool.jsonl"],
        root,
    );
    run_ok(
        &["synth", "intra", "--pool", "pool.jsonl", "--n", "1", "--seed", "5", "--out", "intra.jsonl"],
        root,
    );
    run_ok(
        &["materialize", "--samples", "intra.jsonl", "--images", "images", "--out", "crops"],
        root,
    );

    let entries: Vec<String> = std::fs::read_dir(root.join("crops"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(entries.len(), 3);
    assert!(entries.iter().any(|n| n.contains("original")));
    assert!(entries.iter().any(|n| n.contains("focus")));
    assert!(entries.iter().any(|n| n.contains("context")));
}

#[test]
fn mix_rejects_unbalanced_streams() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write_records(&root.join("records.jsonl"), 12);
    run_ok(
        &["ingest", "--input", "records.jsonl", "--out", "pool.jsonl"],
        root,
    );
    run_ok(
        &["synth", "inter", "--pool", "pool.jsonl", "--n", "2", "--seed", "1", "--out", "inter.jsonl"],
        root,
    );
    run_ok(
        &["synth", "intra", "--pool", "pool.jsonl", "--n", "3", "--seed", "1", "--out", "intra.jsonl"],
        root,
    );
    let err = run_err(
        &["mix", "--inter", "inter.jsonl", "--intra", "intra.jsonl", "--seed", "1", "--out", "train.jsonl"],
        root,
    );
    assert!(err.contains("unbalanced"), "stderr: {err}");
    run_ok(
        &["mix", "--inter", "inter.jsonl", "--intra", "intra.jsonl", "--allow-unbalanced", "--seed", "1", "--out", "train.jsonl"],
        root,
    );
}

#[test]
fn synth_rejects_undersized_pool() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write_records(&root.join("records.jsonl"), 5);
    run_ok(
        &["ingest", "--input", "records.jsonl", "--out", "pool.jsonl"],
        root,
    );
    let err = run_err(
        &["synth", "inter", "--pool", "pool.jsonl", "--n", "2", "--seed", "1", "--out", "x.jsonl"],
        root,
    );
    assert!(err.contains("usable instances"), "stderr: {err}");
}
