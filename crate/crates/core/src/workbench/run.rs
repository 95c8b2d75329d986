//! One experiment end to end: build the dataset, train a model under the
//! configured regime, calibrate the budgeted operating points, and write
//! every artifact. The command-line tool and the sweep driver both call
//! into here, so a sweep cell and a single run produce identical files.

use std::path::{Path, PathBuf};

use crate::analysis::{
    interpolate_loss, lambda_grid, loss_landscape, mi_profile, plane_loss, rank_profile,
    weight_match, DEFAULT_LANDSCAPE_RESOLUTION, DEFAULT_MI_BINS, DEFAULT_PLANE_RESOLUTION,
    DEFAULT_RANK_TOL,
};
use crate::error::Result;
use crate::inference::{build_exit_table, calibrate_budgets, BudgetReport};
use crate::multiexit::{build_model, cost_model, MultiExitModel, Task};
use crate::regimes::{run_regime, TrainLog};
use crate::workbench::checkpoint::{save_checkpoint, CheckpointMeta};
use crate::workbench::config::RunConfig;
use crate::workbench::dataset::Dataset;
use crate::workbench::report::{
    budget_csv, gd_trace_csv, heat_map_svg, landscape_csv, line_plot_svg, mi_csv, path_csv,
    plane_csv, rank_csv, train_log_csv, write_text, PlotSeries, PLOT_LOSS_CLIP,
};

/// Everything a finished training run produced, still in memory.
pub struct TrainedRun {
    pub seed: u64,
    pub dataset: Dataset,
    pub model: MultiExitModel,
    pub log: TrainLog,
    pub report: BudgetReport,
}

/// Task implied by the dataset: integral non-negative labels mean
/// classification, anything else regression.
pub fn task_for(dataset: &Dataset) -> Task {
    match dataset.classes {
        Some(classes) => Task::Classification { classes },
        None => Task::Regression,
    }
}

/// Per-exit loss weights implied by the configured scaling, used when an
/// analysis needs the training objective (path, plane, landscape).
pub fn loss_alpha(cfg: &RunConfig, model: &MultiExitModel) -> Vec<f64> {
    cfg.regime.scaling.resolve(&cost_model(&model.spec)).0
}

/// Directory a run's artifacts go to:
/// `{output_dir}/{regime}-{scaling}-seed{seed}`.
pub fn run_dir(cfg: &RunConfig, seed: u64) -> PathBuf {
    Path::new(&cfg.output_dir).join(format!(
        "{}-{}-seed{}",
        cfg.regime.kind.name(),
        cfg.regime.scaling.name(),
        seed
    ))
}

/// Comment lines embedded at the top of every CSV artifact.
pub fn provenance(cfg: &RunConfig, seed: u64) -> Vec<String> {
    vec![
        format!("seed = {seed}"),
        format!(
            "regime = {}, scaling = {}",
            cfg.regime.kind.name(),
            cfg.regime.scaling.name()
        ),
        format!(
            "config = {}",
            serde_json::to_string(cfg).expect("config serialization cannot fail")
        ),
    ]
}

/// Trains one seed of the configured experiment and calibrates the
/// budget table. Pure compute — nothing is written to disk.
pub fn run_training(cfg: &RunConfig, seed: u64) -> Result<TrainedRun> {
    let dataset = cfg.dataset.build(seed)?;
    let spec = cfg
        .model
        .model_spec(dataset.dim, task_for(&dataset), seed)?;
    let mut model = build_model(&spec)?;
    let opts = cfg.train.train_options(seed)?;
    let log = run_regime(
        &cfg.regime.regime_spec(),
        &mut model,
        (&dataset.train.x, &dataset.train.y),
        (&dataset.val.x, &dataset.val.y),
        &opts,
    )?;
    let report = evaluate_model(cfg, &model, &dataset)?;
    Ok(TrainedRun {
        seed,
        dataset,
        model,
        log,
        report,
    })
}

/// Budgeted cost-accuracy table for an already-trained model: sweep
/// operating points on validation, freeze per budget, measure on test.
pub fn evaluate_model(
    cfg: &RunConfig,
    model: &MultiExitModel,
    dataset: &Dataset,
) -> Result<BudgetReport> {
    let val = build_exit_table(model, &dataset.val.x, &dataset.val.y)?;
    let test = build_exit_table(model, &dataset.test.x, &dataset.test.y)?;
    let cm = cost_model(&model.spec);
    calibrate_budgets(
        cfg.policy.family()?,
        &val,
        &test,
        &cm,
        &cfg.policy.budget_list()?,
    )
}

fn val_metric_series(log: &TrainLog) -> Vec<PlotSeries> {
    let k = log
        .phases
        .iter()
        .flat_map(|p| p.epochs.iter())
        .map(|e| e.val_metrics.len())
        .max()
        .unwrap_or(0);
    let mut series: Vec<PlotSeries> = (1..=k)
        .map(|i| PlotSeries {
            label: format!("exit {i}"),
            points: Vec::new(),
        })
        .collect();
    for phase in &log.phases {
        for e in &phase.epochs {
            for (i, m) in e.val_metrics.iter().enumerate() {
                series[i].points.push((e.epoch as f64, *m));
            }
        }
    }
    series
}

/// Writes a finished run's artifacts and returns their paths:
/// materialized config, training/dominance/budget CSVs, SVG curves, and
/// the weight checkpoint.
pub fn write_run_artifacts(cfg: &RunConfig, run: &TrainedRun) -> Result<Vec<PathBuf>> {
    let dir = run_dir(cfg, run.seed);
    let prov = provenance(cfg, run.seed);
    let mut written = Vec::new();
    let emit = |name: &str, content: &str| -> Result<PathBuf> {
        let path = dir.join(name);
        write_text(&path, content)?;
        Ok(path)
    };

    written.push(emit("config.json", &format!("{}\n", cfg.to_json_pretty()))?);
    written.push(emit("train_log.csv", &train_log_csv(&run.log, &prov))?);
    let has_dominance = run
        .log
        .phases
        .iter()
        .any(|p| p.epochs.iter().any(|e| e.dominance.is_some()));
    if has_dominance {
        written.push(emit("gd_trace.csv", &gd_trace_csv(&run.log, &prov))?);
    }
    written.push(emit("budget_table.csv", &budget_csv(&run.report, &prov))?);

    let loss_points: Vec<(f64, f64)> = run
        .log
        .phases
        .iter()
        .flat_map(|p| p.epochs.iter())
        .map(|e| (e.epoch as f64, e.train_loss))
        .collect();
    written.push(emit(
        "train_loss.svg",
        &line_plot_svg(
            "training objective",
            "epoch",
            "loss",
            &[PlotSeries {
                label: "train".into(),
                points: loss_points,
            }],
        ),
    )?);
    written.push(emit(
        "val_metrics.svg",
        &line_plot_svg(
            "validation metric per exit",
            "epoch",
            "metric",
            &val_metric_series(&run.log),
        ),
    )?);
    let budget_points: Vec<(f64, f64)> = run
        .report
        .rows
        .iter()
        .map(|r| (r.test_cost, r.test_metric))
        .collect();
    written.push(emit(
        "budget_curve.svg",
        &line_plot_svg(
            "cost vs. test metric",
            "mean cost (fraction of full)",
            "test metric",
            &[PlotSeries {
                label: cfg.policy.family.clone(),
                points: budget_points,
            }],
        ),
    )?);

    let ckpt = dir.join("model.mxckpt");
    let meta = CheckpointMeta {
        seed: run.seed,
        regime: cfg.regime.kind.name().into(),
        scaling: cfg.regime.scaling.name().into(),
        note: run.dataset.provenance.clone(),
    };
    save_checkpoint(&run.model, &meta, &ckpt)?;
    written.push(ckpt);
    Ok(written)
}

/// Single-model structural analyses: activation rank, activation-pattern
/// entropy, and the seeded loss landscape (CSV plus heat map). Returns
/// the written paths.
pub fn analyze_single(
    cfg: &RunConfig,
    model: &MultiExitModel,
    dataset: &Dataset,
    seed: u64,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let prov = provenance(cfg, seed);
    let alpha = loss_alpha(cfg, model);
    let mut written = Vec::new();

    let rank = rank_profile(model, &dataset.val.x, DEFAULT_RANK_TOL)?;
    let path = out_dir.join("rank.csv");
    write_text(&path, &rank_csv(&rank, &prov))?;
    written.push(path);

    let mi = mi_profile(model, &dataset.val.x, DEFAULT_MI_BINS)?;
    let path = out_dir.join("mi.csv");
    write_text(&path, &mi_csv(&mi, &prov))?;
    written.push(path);

    let grid = loss_landscape(
        model,
        &dataset.val.x,
        &dataset.val.y,
        &alpha,
        DEFAULT_LANDSCAPE_RESOLUTION,
        seed,
    )?;
    let path = out_dir.join("landscape.csv");
    write_text(&path, &landscape_csv(&grid, &prov))?;
    written.push(path);
    let path = out_dir.join("landscape.svg");
    write_text(
        &path,
        &heat_map_svg(
            "loss landscape",
            &grid.axis,
            &grid.axis,
            &grid.total,
            Some(PLOT_LOSS_CLIP),
        ),
    )?;
    written.push(path);
    Ok(written)
}

/// Two-model analyses: naive and permutation-aligned linear paths, the
/// plane through the aligned triple, and the matching summary.
pub fn analyze_pair(
    cfg: &RunConfig,
    a: &MultiExitModel,
    b: &MultiExitModel,
    dataset: &Dataset,
    seed: u64,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let prov = provenance(cfg, seed);
    let alpha = loss_alpha(cfg, a);
    let lambdas = lambda_grid(21)?;
    let mut written = Vec::new();

    let naive = interpolate_loss(a, b, &lambdas, &dataset.val.x, &dataset.val.y, &alpha)?;
    let path = out_dir.join("path_naive.csv");
    write_text(&path, &path_csv(&naive, &prov))?;
    written.push(path);

    let m = weight_match(a, b, seed)?;
    let b_aligned = crate::analysis::apply_permutation(b, &m.permutation)?;
    let aligned = interpolate_loss(
        a,
        &b_aligned,
        &lambdas,
        &dataset.val.x,
        &dataset.val.y,
        &alpha,
    )?;
    let path = out_dir.join("path_aligned.csv");
    write_text(&path, &path_csv(&aligned, &prov))?;
    written.push(path);

    let mut summary = String::new();
    for line in &prov {
        summary.push_str(&format!("# {line}\n"));
    }
    summary.push_str("initial_sq_distance,matched_sq_distance,sweeps\n");
    summary.push_str(&format!(
        "{},{},{}\n",
        m.initial_sq_distance, m.matched_sq_distance, m.sweeps
    ));
    let path = out_dir.join("match.csv");
    write_text(&path, &summary)?;
    written.push(path);

    let plane = plane_loss(
        a,
        &b_aligned,
        b,
        DEFAULT_PLANE_RESOLUTION,
        &dataset.val.x,
        &dataset.val.y,
        &alpha,
    )?;
    let path = out_dir.join("plane.csv");
    write_text(&path, &plane_csv(&plane, &prov))?;
    written.push(path);
    let path = out_dir.join("plane.svg");
    write_text(
        &path,
        &heat_map_svg(
            "plane through matched models",
            &plane.axis,
            &plane.axis,
            &plane.total,
            Some(PLOT_LOSS_CLIP),
        ),
    )?;
    written.push(path);

    // Curve overlay: naive vs. aligned path totals.
    let overlay = line_plot_svg(
        "linear path, naive vs. matched",
        "lambda",
        "loss",
        &[
            PlotSeries {
                label: "naive".into(),
                points: naive.iter().map(|p| (p.lambda, p.total)).collect(),
            },
            PlotSeries {
                label: "matched".into(),
                points: aligned.iter().map(|p| (p.lambda, p.total)).collect(),
            },
        ],
    );
    let path = out_dir.join("path.svg");
    write_text(&path, &overlay)?;
    written.push(path);
    Ok(written)
}
