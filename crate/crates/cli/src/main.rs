//! `mxlab` — train, evaluate, and dissect multi-exit models from the
//! command line.
//!
//! Exit codes: 0 on success, 2 for configuration mistakes (bad config
//! file, invalid flags, malformed `MX_THREADS`), 3 for runtime failures
//! (I/O, corrupt checkpoints, numerical trouble).

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use mxlab_core::multiexit::Labels;
use mxlab_core::regimes::RegimeKind;
use mxlab_core::workbench::report::{budget_csv, write_text};
use mxlab_core::workbench::run::{
    analyze_pair, analyze_single, evaluate_model, provenance, run_dir, run_training,
    write_run_artifacts,
};
use mxlab_core::workbench::{load_checkpoint, Dataset, RunConfig, SyntheticKind};
use mxlab_core::Error;

#[derive(Parser)]
#[command(
    name = "mxlab",
    version,
    about = "Train and analyze multi-exit networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured seed and write run artifacts.
    Train(TrainArgs),
    /// Rebuild the dataset and re-derive the budget table for a checkpoint.
    Evaluate(EvaluateArgs),
    /// Structural analyses of one checkpoint (or a pair).
    Analyze(AnalyzeArgs),
    /// Train a grid of regimes x seeds, optionally in parallel.
    Sweep(SweepArgs),
    /// Generate a synthetic dataset as CSV splits.
    GenData(GenDataArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the configured seed list (repeatable).
    #[arg(long = "seed")]
    seeds: Vec<u64>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// The configuration the checkpoint was trained under; the dataset
    /// is regenerated from it (checkpoints carry weights, not data).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Output directory (default: the checkpoint's directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Second checkpoint for path/plane/matching analyses.
    #[arg(long)]
    checkpoint_b: Option<PathBuf>,
    /// Output directory (default: `{checkpoint dir}/analysis`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated regime names (default: all seven).
    #[arg(long)]
    regimes: Option<String>,
    /// Worker threads for the sweep grid.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct GenDataArgs {
    /// "spirals" or "tiered-blobs".
    #[arg(long)]
    kind: String,
    #[arg(long, default_value_t = 600)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    d: usize,
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for train.csv / val.csv / test.csv.
    #[arg(long)]
    out: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(exit_code(&err));
        }
    }
}

fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_config() => 2,
        _ => 3,
    }
}

/// Applies `MX_THREADS` (if set) to the global worker pool used by the
/// data-parallel executors. Must run before any parallel work.
fn configure_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var("MX_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            Error::Config(format!(
                "MX_THREADS must be a positive integer, got {raw:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("could not size the worker pool: {e}")))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Train(args) => train(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Analyze(args) => analyze(args),
        Command::Sweep(args) => sweep(args),
        Command::GenData(args) => gen_data(args),
    }
}

fn load_config(path: &Path) -> anyhow::Result<RunConfig> {
    RunConfig::from_path(path).with_context(|| format!("reading config {}", path.display()))
}

fn train(args: TrainArgs) -> anyhow::Result<()> {
    let cfg = load_config(&args.config)?;
    let seeds = if args.seeds.is_empty() {
        cfg.seeds.clone()
    } else {
        args.seeds
    };
    for seed in seeds {
        let run = run_training(&cfg, seed)?;
        let files = write_run_artifacts(&cfg, &run)?;
        println!(
            "trained seed {seed}: {} epochs, {} artifacts in {}",
            run.log.total_epochs(),
            files.len(),
            run_dir(&cfg, seed).display()
        );
    }
    Ok(())
}

/// Loads a checkpoint and rebuilds its dataset from the config, checking
/// that the stored architecture matches what the config would build.
fn load_pair(
    cfg: &RunConfig,
    checkpoint: &Path,
) -> anyhow::Result<(mxlab_core::multiexit::MultiExitModel, u64, Dataset)> {
    let (model, meta) = load_checkpoint(checkpoint)
        .with_context(|| format!("loading checkpoint {}", checkpoint.display()))?;
    let dataset = cfg.dataset.build(meta.seed)?;
    let expected = cfg.model.model_spec(
        dataset.dim,
        mxlab_core::workbench::task_for(&dataset),
        meta.seed,
    )?;
    if expected != model.spec {
        return Err(Error::Config(format!(
            "checkpoint architecture does not match config (checkpoint {:?})",
            checkpoint
        ))
        .into());
    }
    Ok((model, meta.seed, dataset))
}

fn evaluate(args: EvaluateArgs) -> anyhow::Result<()> {
    let cfg = load_config(&args.config)?;
    let (model, seed, dataset) = load_pair(&cfg, &args.checkpoint)?;
    let report = evaluate_model(&cfg, &model, &dataset)?;
    let out = args
        .out
        .or_else(|| args.checkpoint.parent().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    let path = out.join("budget_table.csv");
    write_text(&path, &budget_csv(&report, &provenance(&cfg, seed)))?;
    for row in &report.rows {
        println!(
            "budget {:>9}: parameter {:.4}, test metric {:.4} at cost {:.4}",
            row.budget.to_string(),
            row.parameter(),
            row.test_metric,
            row.test_cost
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> anyhow::Result<()> {
    let cfg = load_config(&args.config)?;
    let (model, seed, dataset) = load_pair(&cfg, &args.checkpoint)?;
    let out = args.out.unwrap_or_else(|| {
        args.checkpoint
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
            .join("analysis")
    });
    let mut files = analyze_single(&cfg, &model, &dataset, seed, &out)?;
    if let Some(b_path) = args.checkpoint_b {
        let (model_b, _, _) = load_pair(&cfg, &b_path)?;
        files.extend(analyze_pair(&cfg, &model, &model_b, &dataset, seed, &out)?);
    }
    for f in &files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn parse_regimes(spec: Option<&str>) -> Result<Vec<RegimeKind>, Error> {
    let Some(spec) = spec else {
        return Ok(RegimeKind::ALL.to_vec());
    };
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            RegimeKind::ALL
                .iter()
                .copied()
                .find(|k| k.name() == s)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "unknown regime {s:?}; expected one of: {}",
                        RegimeKind::ALL
                            .iter()
                            .map(|k| k.name())
                            .collect::<Vec<_>>()
                            .join(", ")
                    ))
                })
        })
        .collect()
}

fn sweep(args: SweepArgs) -> anyhow::Result<()> {
    let cfg = load_config(&args.config)?;
    if args.jobs == 0 {
        return Err(Error::Config("--jobs must be at least 1".into()).into());
    }
    let regimes = parse_regimes(args.regimes.as_deref())?;
    let cells: Vec<(RegimeKind, u64)> = regimes
        .iter()
        .flat_map(|&k| cfg.seeds.iter().map(move |&s| (k, s)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| Error::Config(format!("could not build sweep pool: {e}")))?;
    let results: Vec<(RegimeKind, u64, Result<PathBuf, Error>)> = pool.install(|| {
        use rayon::prelude::*;
        cells
            .par_iter()
            .map(|&(kind, seed)| {
                let mut cell_cfg = cfg.clone();
                cell_cfg.regime.kind = kind;
                let outcome = run_training(&cell_cfg, seed)
                    .and_then(|run| write_run_artifacts(&cell_cfg, &run))
                    .map(|_| run_dir(&cell_cfg, seed));
                (kind, seed, outcome)
            })
            .collect()
    });

    let mut first_err = None;
    for (kind, seed, outcome) in results {
        match outcome {
            Ok(dir) => println!("{} seed {seed}: ok, {}", kind.name(), dir.display()),
            Err(e) => {
                println!("{} seed {seed}: FAILED: {e}", kind.name());
                first_err.get_or_insert(e);
            }
        }
    }
    match first_err {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn write_split_csv(path: &Path, x: &mxlab_core::numerics::tensor::Tensor, y: &Labels) -> Result<(), Error> {
    let d = x.cols();
    let mut out = String::new();
    for j in 1..=d {
        out.push_str(&format!("f{j},"));
    }
    out.push_str("label\n");
    for i in 0..x.rows() {
        for v in x.row(i) {
            out.push_str(&format!("{v},"));
        }
        match y {
            Labels::Classes(c) => out.push_str(&format!("{}\n", c[i])),
            Labels::Values(v) => out.push_str(&format!("{}\n", v[i])),
        }
    }
    write_text(path, &out)
}

fn gen_data(args: GenDataArgs) -> anyhow::Result<()> {
    let kind: SyntheticKind = args.kind.parse::<SyntheticKind>()?;
    let dataset = mxlab_core::workbench::generate_synthetic(
        kind, args.n, args.d, args.classes, args.noise, args.seed,
    )?;
    for (name, split) in [
        ("train.csv", &dataset.train),
        ("val.csv", &dataset.val),
        ("test.csv", &dataset.test),
    ] {
        let path = args.out.join(name);
        write_split_csv(&path, &split.x, &split.y)?;
        println!("wrote {} ({} rows)", path.display(), split.len());
    }
    Ok(())
}
