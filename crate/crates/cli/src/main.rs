//! `multiground` - synthesize multi-image grounding training data and
//! score structured responses with the rule-based spatial reward.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use multiground_core::grpo::{eval_groups, GroupLine, GrpoConfig};
use multiground_core::harness::{mix, serve, stats, suite};
use multiground_core::ingest::{self, GroundingPool};
use multiground_core::io as mgio;
use multiground_core::materialize::materialize;
use multiground_core::reward::{score_batch, ScorePair};
use multiground_core::synth::{inter, intra, SynthReport};
use multiground_core::template::TemplatePool;
use serde::Deserialize;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "multiground",
    version,
    about = "Multi-image grounding data synthesis and rule-based spatial rewards"
)]
struct Cli {
    /// JSON file supplying defaults for seed, min-edge, k, epsilon, beta,
    /// and the template pool path.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed for every randomized step (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output path (file, or directory for materialize).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert source annotation records into the unified grounding pool.
    Ingest {
        /// Source records, one JSON object per line.
        #[arg(long)]
        input: PathBuf,
        /// Minimum image edge in pixels (inclusive; default 640).
        #[arg(long)]
        min_edge: Option<u32>,
    },
    /// Synthesize multi-image training samples from a pool.
    Synth {
        #[command(subcommand)]
        branch: SynthBranch,
    },
    /// Extract slot pixels (original images and crops) into a directory.
    Materialize {
        /// Sample file produced by `synth`.
        #[arg(long)]
        samples: PathBuf,
        /// Directory holding the source image files.
        #[arg(long)]
        images: PathBuf,
    },
    /// Interleave inter and intra sample streams at the fixed 1:1 ratio.
    Mix {
        #[arg(long)]
        inter: PathBuf,
        #[arg(long)]
        intra: PathBuf,
        /// Skip the 1:1 ratio check.
        #[arg(long)]
        allow_unbalanced: bool,
    },
    /// Score a batch of (ground truth, response) pairs.
    Score {
        /// Scoring pairs, one `scorepair/v1` line each.
        #[arg(long)]
        pairs: PathBuf,
    },
    /// Serve the line-delimited scoring protocol on stdio (or a socket).
    Serve {
        /// Listen on a Unix socket instead of stdio.
        #[arg(long)]
        socket: Option<PathBuf>,
    },
    /// Evaluate GRPO advantages, ratios, KL, and objective per group.
    GrpoEval {
        /// Rollout groups, one `group/v1` line each.
        #[arg(long)]
        groups: PathBuf,
        /// Clipping half-width (default 0.2).
        #[arg(long)]
        epsilon: Option<f64>,
        /// KL penalty coefficient (default 0.01).
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Run the seeded reward validation suite and emit its report.
    Simulate {
        /// Case count for the randomized properties (default 500).
        #[arg(long)]
        cases: Option<usize>,
    },
    /// Dataset statistics for a pool or sample file.
    Stats {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Subcommand)]
enum SynthBranch {
    /// Distractor-rich samples from semantically decoupled instances.
    Inter {
        #[arg(long)]
        pool: PathBuf,
        /// Number of samples to synthesize.
        #[arg(long)]
        n: usize,
        /// Images per sample (default 3).
        #[arg(long)]
        k: Option<usize>,
        /// Template pool file; the built-in pool when omitted.
        #[arg(long)]
        templates: Option<PathBuf>,
    },
    /// Correlated cross-view samples from single instances.
    Intra {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        templates: Option<PathBuf>,
    },
}

/// Defaults loadable from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    min_edge: Option<u32>,
    k: Option<usize>,
    epsilon: Option<f64>,
    beta: Option<f64>,
    templates: Option<PathBuf>,
    cases: Option<usize>,
}

struct Resolved {
    seed: u64,
    out: Option<PathBuf>,
    cfg: FileConfig,
}

impl Resolved {
    fn out(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .context("this command requires --out")
    }
}

fn load_templates(explicit: Option<&Path>, cfg: &FileConfig) -> Result<TemplatePool> {
    match explicit.or(cfg.templates.as_deref()) {
        Some(path) => TemplatePool::load(path)
            .with_context(|| format!("loading templates from {}", path.display())),
        None => Ok(TemplatePool::builtin()),
    }
}

fn load_pool(path: &Path) -> Result<GroundingPool> {
    GroundingPool::load(path).with_context(|| format!("loading pool from {}", path.display()))
}

fn emit_json<T: serde::Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn emit_jsonl<T: serde::Serialize>(out: Option<&Path>, items: &[T]) -> Result<()> {
    match out {
        Some(path) => mgio::write_jsonl(path, items.iter())?,
        None => {
            let stdout = std::io::stdout();
            let mut handle = stdout.lock();
            for item in items {
                serde_json::to_writer(&mut handle, item)?;
                handle.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

fn write_samples(out: &Path, report: &SynthReport, branch: &str) -> Result<()> {
    mgio::write_jsonl(out, report.samples.iter())?;
    eprintln!(
        "{branch}: wrote {} samples to {} (skipped {} instances, {} redraws)",
        report.samples.len(),
        out.display(),
        report.skipped_instances,
        report.redraws
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg: FileConfig = match &cli.config {
        Some(path) => serde_json::from_reader(
            File::open(path).with_context(|| format!("opening config {}", path.display()))?,
        )
        .with_context(|| format!("parsing config {}", path.display()))?,
        None => FileConfig::default(),
    };
    let resolved = Resolved {
        seed: cli.seed.or(cfg.seed).unwrap_or(0),
        out: cli.out,
        cfg,
    };

    match cli.command {
        Command::Ingest { input, min_edge } => {
            let min_edge = min_edge
                .or(resolved.cfg.min_edge)
                .unwrap_or(ingest::DEFAULT_MIN_EDGE);
            let file = File::open(&input)
                .with_context(|| format!("opening input {}", input.display()))?;
            let (pool, report) = ingest::build_pool(BufReader::new(file).lines(), min_edge)?;
            pool.save(resolved.out()?)?;
            eprintln!(
                "ingest: kept {} of {} records -> {}",
                report.kept,
                report.total,
                resolved.out()?.display()
            );
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Synth { branch } => match branch {
            SynthBranch::Inter {
                pool,
                n,
                k,
                templates,
            } => {
                let pool = load_pool(&pool)?;
                let templates = load_templates(templates.as_deref(), &resolved.cfg)?;
                let k = k.or(resolved.cfg.k).unwrap_or(inter::DEFAULT_K);
                let report = inter::synth_inter_dataset(&pool, n, k, &templates, resolved.seed)?;
                write_samples(resolved.out()?, &report, "synth inter")?;
            }
            SynthBranch::Intra { pool, n, templates } => {
                let pool = load_pool(&pool)?;
                let templates = load_templates(templates.as_deref(), &resolved.cfg)?;
                let report = intra::synth_intra_dataset(&pool, n, &templates, resolved.seed)?;
                write_samples(resolved.out()?, &report, "synth intra")?;
            }
        },
        Command::Materialize { samples, images } => {
            let report = materialize(&samples, &images, resolved.out()?)?;
            eprintln!(
                "materialize: {} samples, {} images written to {}",
                report.samples,
                report.images_written,
                resolved.out()?.display()
            );
        }
        Command::Mix {
            inter,
            intra,
            allow_unbalanced,
        } => {
            let summary = mix::mix_files(
                &inter,
                &intra,
                resolved.seed,
                !allow_unbalanced,
                resolved.out()?,
            )?;
            eprintln!(
                "mix: {} inter + {} intra -> {} samples at {}",
                summary.inter,
                summary.intra,
                summary.total,
                resolved.out()?.display()
            );
        }
        Command::Score { pairs } => {
            let pairs: Vec<ScorePair> = mgio::read_jsonl(&pairs)?;
            let scores = score_batch(&pairs);
            emit_jsonl(resolved.out.as_deref(), &scores)?;
            eprintln!("score: {} pairs scored", scores.len());
        }
        Command::Serve { socket } => match socket {
            None => {
                let stdin = std::io::stdin();
                let stdout = std::io::stdout();
                let summary = serve::serve_scoring(stdin.lock(), stdout.lock())?;
                eprintln!(
                    "serve: {} requests ({} scored, {} errors)",
                    summary.requests, summary.scored, summary.errors
                );
            }
            Some(path) => serve_socket(&path)?,
        },
        Command::GrpoEval {
            groups,
            epsilon,
            beta,
        } => {
            let defaults = GrpoConfig::default();
            let cfg = GrpoConfig {
                epsilon: epsilon.or(resolved.cfg.epsilon).unwrap_or(defaults.epsilon),
                beta: beta.or(resolved.cfg.beta).unwrap_or(defaults.beta),
                max_log_ratio: defaults.max_log_ratio,
            };
            cfg.validate()?;
            let lines: Vec<GroupLine> = mgio::read_jsonl(&groups)?;
            let evals = eval_groups(lines, &cfg);
            let skipped = evals.iter().filter(|e| e.skip).count();
            emit_jsonl(resolved.out.as_deref(), &evals)?;
            eprintln!(
                "grpo-eval: {} groups ({} skipped) at epsilon {} beta {}",
                evals.len(),
                skipped,
                cfg.epsilon,
                cfg.beta
            );
        }
        Command::Simulate { cases } => {
            let config = suite::SuiteConfig {
                cases: cases
                    .or(resolved.cfg.cases)
                    .unwrap_or(suite::SuiteConfig::default().cases),
                seed: resolved.seed,
            };
            let report = suite::run_reward_suite(&config);
            emit_json(resolved.out.as_deref(), &report)?;
            if !report.overall_pass {
                bail!("reward validation suite failed");
            }
            eprintln!("simulate: all reward properties hold");
        }
        Command::Stats { input } => {
            let report = stats::stats_for_file(&input)?;
            emit_json(resolved.out.as_deref(), &report)?;
        }
    }
    Ok(())
}

/// Accepts connections one at a time, running the scoring loop on each.
fn serve_socket(path: &Path) -> Result<()> {
    use std::os::unix::net::UnixListener;
    if path.exists() {
        std::fs::remove_file(path)
            .with_context(|| format!("removing stale socket {}", path.display()))?;
    }
    let listener = UnixListener::bind(path)
        .with_context(|| format!("binding socket {}", path.display()))?;
    eprintln!("serve: listening on {}", path.display());
    for stream in listener.incoming() {
        let stream = stream?;
        let reader = BufReader::new(stream.try_clone()?);
        let summary = serve::serve_scoring(reader, stream)?;
        eprintln!(
            "serve: connection closed after {} requests ({} errors)",
            summary.requests, summary.errors
        );
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
