//! Report emission: CSV data artifacts and self-contained SVG plots.
//!
//! Every emitter is a pure function from values to text, and all float
//! formatting is fixed, so identical inputs produce byte-identical files.
//! CSV data cells use Rust's shortest round-trip float form (exact);
//! plot coordinates are rounded for readability. Each CSV starts with
//! `# `-prefixed provenance lines supplied by the caller (config, seed,
//! regime) so an artifact alone identifies the run that produced it.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::analysis::{LandscapeGrid, MIProfile, PathPoint, PlaneGrid, RankProfile};
use crate::error::Result;
use crate::inference::{Budget, BudgetReport};
use crate::regimes::TrainLog;

/// Loss values above this are flattened to it — in plot COLOR only.
/// The underlying CSVs always carry raw values.
pub const PLOT_LOSS_CLIP: f64 = 2.0;

fn comment_block(provenance: &[String]) -> String {
    let mut out = String::new();
    for line in provenance {
        // Keep comments single-line no matter what the caller passes.
        writeln!(out, "# {}", line.replace('\n', " ")).unwrap();
    }
    out
}

/// Writes `content` to `path`, creating parent directories as needed.
pub fn write_text(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, content)?;
    Ok(())
}

/// Budget as a CSV cell: the raw fraction, or "unlimited".
pub fn budget_label(b: &Budget) -> String {
    match b {
        Budget::Fraction(f) => format!("{f}"),
        Budget::Unlimited => "unlimited".into(),
    }
}

/// One row per epoch: objective, learning rate, and every exit's
/// validation metric. Exits keep their columns even in phases that do
/// not train them, which is what makes regime comparisons readable.
pub fn train_log_csv(log: &TrainLog, provenance: &[String]) -> String {
    let k = log
        .phases
        .iter()
        .flat_map(|p| p.epochs.iter())
        .map(|e| e.val_metrics.len())
        .max()
        .unwrap_or(0);
    let mut out = comment_block(provenance);
    out.push_str("epoch,phase,lr,train_loss");
    for i in 1..=k {
        write!(out, ",val_metric_exit_{i}").unwrap();
    }
    out.push('\n');
    for phase in &log.phases {
        for e in &phase.epochs {
            write!(out, "{},{},{},{}", e.epoch, phase.id, e.lr, e.train_loss).unwrap();
            for i in 0..k {
                match e.val_metrics.get(i) {
                    Some(m) => write!(out, ",{m}").unwrap(),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
    }
    out
}

/// Long-format gradient dominance trace: one row per (probe epoch,
/// participating exit).
pub fn gd_trace_csv(log: &TrainLog, provenance: &[String]) -> String {
    let mut out = comment_block(provenance);
    out.push_str("epoch,phase,exit,dominance\n");
    for phase in &log.phases {
        for e in &phase.epochs {
            if let Some(dom) = &e.dominance {
                for (exit, d) in phase.exits.iter().zip(dom.iter()) {
                    writeln!(out, "{},{},{},{}", e.epoch, phase.id, exit, d).unwrap();
                }
            }
        }
    }
    out
}

/// The budgeted cost-accuracy table: per budget, the operating point
/// chosen on validation and its honest test-split measurement.
pub fn budget_csv(report: &BudgetReport, provenance: &[String]) -> String {
    let mut out = comment_block(provenance);
    writeln!(out, "# policy_family = {:?}", report.family).unwrap();
    out.push_str("budget,parameter,val_metric,val_cost,test_metric,test_cost\n");
    for row in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            budget_label(&row.budget),
            row.parameter(),
            row.val_metric,
            row.val_cost,
            row.test_metric,
            row.test_cost
        )
        .unwrap();
    }
    out
}

/// Numerical rank of each block's activation matrix.
pub fn rank_csv(profile: &RankProfile, provenance: &[String]) -> String {
    let mut out = comment_block(provenance);
    writeln!(out, "# rel_tol = {}", profile.rel_tol).unwrap();
    out.push_str("block,units,samples,rank\n");
    for b in &profile.per_block {
        writeln!(out, "{},{},{},{}", b.block, b.units, b.samples, b.rank).unwrap();
    }
    out
}

/// Binned activation-pattern entropy of each block.
pub fn mi_csv(profile: &MIProfile, provenance: &[String]) -> String {
    let mut out = comment_block(provenance);
    writeln!(out, "# bins = {}, samples = {}", profile.bins, profile.samples).unwrap();
    out.push_str("block,distinct_patterns,entropy_bits\n");
    for b in &profile.per_block {
        writeln!(out, "{},{},{}", b.block, b.distinct, b.bits).unwrap();
    }
    out
}

/// Loss along the interpolation path, totals plus per-exit columns.
pub fn path_csv(points: &[PathPoint], provenance: &[String]) -> String {
    let k = points.iter().map(|p| p.per_exit.len()).max().unwrap_or(0);
    let mut out = comment_block(provenance);
    out.push_str("lambda,total");
    for i in 1..=k {
        write!(out, ",exit_{i}").unwrap();
    }
    out.push('\n');
    for p in points {
        write!(out, "{},{}", p.lambda, p.total).unwrap();
        for i in 0..k {
            match p.per_exit.get(i) {
                Some(v) => write!(out, ",{v}").unwrap(),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

fn grid_csv(
    axis_x: &[f64],
    axis_y: &[f64],
    total: &[f64],
    per_exit: &[Vec<f64>],
    labels: (&str, &str),
    provenance: &[String],
) -> String {
    let k = per_exit.iter().map(|v| v.len()).max().unwrap_or(0);
    let mut out = comment_block(provenance);
    write!(out, "{},{},total", labels.0, labels.1).unwrap();
    for i in 1..=k {
        write!(out, ",exit_{i}").unwrap();
    }
    out.push('\n');
    let ny = axis_y.len();
    for (ix, x) in axis_x.iter().enumerate() {
        for (iy, y) in axis_y.iter().enumerate() {
            let idx = ix * ny + iy;
            write!(out, "{},{},{}", x, y, total[idx]).unwrap();
            for exit in per_exit.iter() {
                write!(out, ",{}", exit[idx]).unwrap();
            }
            out.push('\n');
        }
    }
    out
}

/// Raw plane-section losses in long format (`s,t,total,exit_k...`).
pub fn plane_csv(grid: &PlaneGrid, provenance: &[String]) -> String {
    grid_csv(
        &grid.axis,
        &grid.axis,
        &grid.total,
        &grid.per_exit,
        ("s", "t"),
        provenance,
    )
}

/// Raw loss-landscape values in long format (`x,y,total,exit_k...`).
pub fn landscape_csv(grid: &LandscapeGrid, provenance: &[String]) -> String {
    grid_csv(
        &grid.axis,
        &grid.axis,
        &grid.total,
        &grid.per_exit,
        ("x", "y"),
        provenance,
    )
}

// ---------------------------------------------------------------------
// SVG plots
// ---------------------------------------------------------------------

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#bcbd22",
];

/// Five-stop perceptual color map from dark purple to yellow.
pub fn color_map(t: f64) -> String {
    const STOPS: [(f64, [f64; 3]); 5] = [
        (0.00, [68.0, 1.0, 84.0]),
        (0.25, [59.0, 82.0, 139.0]),
        (0.50, [33.0, 145.0, 140.0]),
        (0.75, [94.0, 201.0, 98.0]),
        (1.00, [253.0, 231.0, 37.0]),
    ];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let mut rgb = STOPS[STOPS.len() - 1].1;
    for w in STOPS.windows(2) {
        let (t0, c0) = w[0];
        let (t1, c1) = w[1];
        if t <= t1 {
            let u = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
            rgb = [
                c0[0] + u * (c1[0] - c0[0]),
                c0[1] + u * (c1[1] - c0[1]),
                c0[2] + u * (c1[2] - c0[2]),
            ];
            break;
        }
    }
    format!(
        "#{:02x}{:02x}{:02x}",
        rgb[0].round() as u8,
        rgb[1].round() as u8,
        rgb[2].round() as u8
    )
}

/// One labeled curve for [`line_plot_svg`].
pub struct PlotSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn tick_label(v: f64) -> String {
    format!("{v:.3}")
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Hand-rolled line plot: fixed 640x420 canvas, shared axes, legend.
/// Non-finite points are dropped.
pub fn line_plot_svg(title: &str, x_label: &str, y_label: &str, series: &[PlotSeries]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const L: f64 = 72.0;
    const R: f64 = 160.0;
    const T: f64 = 44.0;
    const B: f64 = 52.0;
    let pw = W - L - R;
    let ph = H - T - B;

    let finite: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let (mut x0, mut x1) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.0), hi.max(p.0))
        });
    let (mut y0, mut y1) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.1), hi.max(p.1))
        });
    if !(x0.is_finite() && x1.is_finite()) {
        (x0, x1) = (0.0, 1.0);
    }
    if !(y0.is_finite() && y1.is_finite()) {
        (y0, y1) = (0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| L + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| T + ph - (y - y0) / (y1 - y0) * ph;

    let mut svg = String::new();
    write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\" font-family=\"monospace\" font-size=\"12\">\n"
    )
    .unwrap();
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    write!(
        svg,
        "<text x=\"{:.2}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        L + pw / 2.0,
        esc(title)
    )
    .unwrap();
    // Axes, ticks, labels.
    write!(
        svg,
        "<rect x=\"{L:.2}\" y=\"{T:.2}\" width=\"{pw:.2}\" height=\"{ph:.2}\" \
         fill=\"none\" stroke=\"#333\"/>\n"
    )
    .unwrap();
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * f64::from(i) / 4.0;
        let fy = y0 + (y1 - y0) * f64::from(i) / 4.0;
        let px = sx(fx);
        let py = sy(fy);
        write!(
            svg,
            "<line x1=\"{px:.2}\" y1=\"{:.2}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"#333\"/>\n",
            T + ph,
            T + ph + 5.0
        )
        .unwrap();
        write!(
            svg,
            "<text x=\"{px:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n",
            T + ph + 20.0,
            tick_label(fx)
        )
        .unwrap();
        write!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{L:.2}\" y2=\"{py:.2}\" stroke=\"#333\"/>\n",
            L - 5.0
        )
        .unwrap();
        write!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n",
            L - 9.0,
            py + 4.0,
            tick_label(fy)
        )
        .unwrap();
    }
    write!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n",
        L + pw / 2.0,
        H - 12.0,
        esc(x_label)
    )
    .unwrap();
    write!(
        svg,
        "<text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" \
         transform=\"rotate(-90 16 {:.2})\">{}</text>\n",
        T + ph / 2.0,
        T + ph / 2.0,
        esc(y_label)
    )
    .unwrap();
    // Curves and legend.
    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if !pts.is_empty() {
            write!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                pts.join(" ")
            )
            .unwrap();
        }
        let ly = T + 14.0 * (si as f64) + 6.0;
        write!(
            svg,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n",
            W - R + 12.0,
            ly - 9.0
        )
        .unwrap();
        write!(
            svg,
            "<text x=\"{:.2}\" y=\"{ly:.2}\">{}</text>\n",
            W - R + 27.0,
            esc(&s.label)
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

/// Heat map over a rectangular grid. `values[ix * ys.len() + iy]` is the
/// cell at `(xs[ix], ys[iy])`; y grows upward. `color_clip` caps values
/// for the COLOR scale only — every cell keeps its raw value in a
/// `<title>` element, so no data is lost to the clip.
pub fn heat_map_svg(
    title: &str,
    xs: &[f64],
    ys: &[f64],
    values: &[f64],
    color_clip: Option<f64>,
) -> String {
    const PLOT: f64 = 440.0;
    const L: f64 = 64.0;
    const T: f64 = 44.0;
    const B: f64 = 48.0;
    const CBAR: f64 = 78.0;
    let nx = xs.len().max(1);
    let ny = ys.len().max(1);
    let cw = PLOT / nx as f64;
    let ch = PLOT / ny as f64;
    let w = L + PLOT + CBAR + 16.0;
    let h = T + PLOT + B;

    let clipped = |v: f64| match color_clip {
        Some(c) => v.min(c),
        None => v,
    };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in values {
        if v.is_finite() {
            let c = clipped(v);
            lo = lo.min(c);
            hi = hi.max(c);
        }
    }
    if !(lo.is_finite() && hi.is_finite()) {
        (lo, hi) = (0.0, 1.0);
    }
    let norm = |v: f64| {
        if hi > lo {
            (clipped(v) - lo) / (hi - lo)
        } else {
            0.5
        }
    };

    let mut svg = String::new();
    write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\" font-family=\"monospace\" font-size=\"12\">\n"
    )
    .unwrap();
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    write!(
        svg,
        "<text x=\"{:.2}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        L + PLOT / 2.0,
        esc(title)
    )
    .unwrap();
    for (ix, _) in xs.iter().enumerate() {
        for (iy, _) in ys.iter().enumerate() {
            let v = values[ix * ny + iy];
            let fill = if v.is_finite() {
                color_map(norm(v))
            } else {
                "#999999".into()
            };
            let x = L + ix as f64 * cw;
            // iy = 0 is the bottom row.
            let y = T + PLOT - (iy + 1) as f64 * ch;
            write!(
                svg,
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
                 fill=\"{fill}\"><title>{v}</title></rect>\n",
                cw + 0.5,
                ch + 0.5
            )
            .unwrap();
        }
    }
    // Corner tick labels on both axes.
    if let (Some(&xa), Some(&xb)) = (xs.first(), xs.last()) {
        write!(
            svg,
            "<text x=\"{L:.2}\" y=\"{:.2}\">{}</text>\n<text x=\"{:.2}\" y=\"{:.2}\" \
             text-anchor=\"end\">{}</text>\n",
            T + PLOT + 18.0,
            tick_label(xa),
            L + PLOT,
            T + PLOT + 18.0,
            tick_label(xb)
        )
        .unwrap();
    }
    if let (Some(&ya), Some(&yb)) = (ys.first(), ys.last()) {
        write!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n<text x=\"{:.2}\" \
             y=\"{:.2}\" text-anchor=\"end\">{}</text>\n",
            L - 8.0,
            T + PLOT,
            tick_label(ya),
            L - 8.0,
            T + 12.0,
            tick_label(yb)
        )
        .unwrap();
    }
    // Color bar with the scale's effective bounds.
    let bx = L + PLOT + 24.0;
    svg.push_str("<defs><linearGradient id=\"scale\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">\n");
    for i in 0..=4 {
        let t = f64::from(i) / 4.0;
        write!(
            svg,
            "<stop offset=\"{:.2}\" stop-color=\"{}\"/>\n",
            t,
            color_map(t)
        )
        .unwrap();
    }
    svg.push_str("</linearGradient></defs>\n");
    write!(
        svg,
        "<rect x=\"{bx:.2}\" y=\"{T:.2}\" width=\"16\" height=\"{PLOT:.2}\" \
         fill=\"url(#scale)\" stroke=\"#333\"/>\n"
    )
    .unwrap();
    write!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\">{}</text>\n<text x=\"{:.2}\" y=\"{:.2}\">{}</text>\n",
        bx + 20.0,
        T + PLOT,
        tick_label(lo),
        bx + 20.0,
        T + 12.0,
        tick_label(hi)
    )
    .unwrap();
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{BudgetRow, ExitPolicy, PolicyFamily};
    use crate::regimes::{EpochRecord, PhaseRecord};

    fn sample_log() -> TrainLog {
        TrainLog {
            phases: vec![
                PhaseRecord {
                    id: "exit-1".into(),
                    exits: vec![1],
                    epochs: vec![
                        EpochRecord {
                            epoch: 1,
                            train_loss: 1.5,
                            lr: 0.001,
                            val_metrics: vec![0.5, 0.25],
                            wall_secs: 0.0,
                            dominance: Some(vec![0.75]),
                        },
                        EpochRecord {
                            epoch: 2,
                            train_loss: 1.25,
                            lr: 0.0005,
                            val_metrics: vec![0.625, 0.5],
                            wall_secs: 0.0,
                            dominance: None,
                        },
                    ],
                    steps: 10,
                    stopped_early: false,
                    alternation: None,
                },
                PhaseRecord {
                    id: "joint".into(),
                    exits: vec![1, 2],
                    epochs: vec![EpochRecord {
                        epoch: 3,
                        train_loss: 1.0,
                        lr: 0.001,
                        val_metrics: vec![0.75, 0.625],
                        wall_secs: 0.0,
                        dominance: Some(vec![0.5, 0.5]),
                    }],
                    steps: 5,
                    stopped_early: true,
                    alternation: None,
                },
            ],
        }
    }

    #[test]
    fn train_csv_layout_and_determinism() {
        let log = sample_log();
        let prov = vec!["seed = 7".to_string(), "regime = joint".to_string()];
        let a = train_log_csv(&log, &prov);
        let b = train_log_csv(&log, &prov);
        assert_eq!(a, b, "identical inputs must emit identical bytes");
        let lines: Vec<&str> = a.lines().collect();
        assert_eq!(lines[0], "# seed = 7");
        assert_eq!(lines[1], "# regime = joint");
        assert_eq!(lines[2], "epoch,phase,lr,train_loss,val_metric_exit_1,val_metric_exit_2");
        assert_eq!(lines[3], "1,exit-1,0.001,1.5,0.5,0.25");
        assert_eq!(lines.len(), 3 + 3);
    }

    #[test]
    fn gd_trace_pairs_exits_with_values() {
        let log = sample_log();
        let csv = gd_trace_csv(&log, &[]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "epoch,phase,exit,dominance");
        assert_eq!(lines[1], "1,exit-1,1,0.75");
        assert_eq!(lines[2], "3,joint,1,0.5");
        assert_eq!(lines[3], "3,joint,2,0.5");
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn budget_csv_rows_and_labels() {
        let report = BudgetReport {
            family: PolicyFamily::MaxProb,
            rows: vec![
                BudgetRow {
                    budget: Budget::Fraction(0.25),
                    policy: ExitPolicy::Threshold {
                        criterion: crate::inference::Criterion::MaxProb,
                        tau: 0.5,
                    },
                    val_metric: 0.75,
                    val_cost: 0.2,
                    test_metric: 0.7,
                    test_cost: 0.21,
                    test_histogram: vec![3, 1],
                },
                BudgetRow {
                    budget: Budget::Unlimited,
                    policy: ExitPolicy::Threshold {
                        criterion: crate::inference::Criterion::MaxProb,
                        tau: 1.0,
                    },
                    val_metric: 0.875,
                    val_cost: 1.0,
                    test_metric: 0.85,
                    test_cost: 1.0,
                    test_histogram: vec![0, 4],
                },
            ],
        };
        let csv = budget_csv(&report, &["config = {}".into()]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[2], "budget,parameter,val_metric,val_cost,test_metric,test_cost");
        assert_eq!(lines[3], "0.25,0.5,0.75,0.2,0.7,0.21");
        assert_eq!(lines[4], "unlimited,1,0.875,1,0.85,1");
    }

    #[test]
    fn path_csv_includes_per_exit_columns() {
        let points = vec![
            PathPoint {
                lambda: 0.0,
                total: 1.0,
                per_exit: vec![0.5, 0.5],
            },
            PathPoint {
                lambda: 1.0,
                total: 2.0,
                per_exit: vec![1.5, 0.5],
            },
        ];
        let csv = path_csv(&points, &[]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "lambda,total,exit_1,exit_2");
        assert_eq!(lines[1], "0,1,0.5,0.5");
        assert_eq!(lines[2], "1,2,1.5,0.5");
    }

    #[test]
    fn color_map_endpoints_and_midpoint() {
        assert_eq!(color_map(0.0), "#440154");
        assert_eq!(color_map(1.0), "#fde725");
        assert_eq!(color_map(0.5), "#21918c");
        // Out-of-range and non-finite inputs stay valid colors.
        assert_eq!(color_map(-3.0), "#440154");
        assert_eq!(color_map(7.0), "#fde725");
        assert_eq!(color_map(f64::NAN), "#440154");
    }

    #[test]
    fn heat_map_clips_color_but_keeps_raw_values() {
        let xs = [0.0, 1.0];
        let ys = [0.0, 1.0];
        // One benign cell, one at the clip, one far above it.
        let values = [0.0, 1.0, 2.0, 10.0];
        let clipped = heat_map_svg("t", &xs, &ys, &values, Some(2.0));
        // The raw value survives in the tooltip...
        assert!(clipped.contains("<title>10</title>"), "{clipped}");
        // ...and the 10.0 cell gets the same color as the 2.0 cell.
        let color_of = |svg: &str, raw: &str| -> String {
            let tag = format!("<title>{raw}</title>");
            let end = svg.find(&tag).expect("cell present");
            let start = svg[..end].rfind("fill=\"").unwrap() + 6;
            svg[start..start + 7].to_string()
        };
        assert_eq!(color_of(&clipped, "10"), color_of(&clipped, "2"));
        // Without the clip they differ.
        let raw = heat_map_svg("t", &xs, &ys, &values, None);
        assert_ne!(color_of(&raw, "10"), color_of(&raw, "2"));
        assert_eq!(clipped, heat_map_svg("t", &xs, &ys, &values, Some(2.0)));
    }

    #[test]
    fn line_plot_has_one_curve_per_series_and_legend() {
        let series = vec![
            PlotSeries {
                label: "train".into(),
                points: vec![(0.0, 1.0), (1.0, 0.5), (2.0, 0.25)],
            },
            PlotSeries {
                label: "val<1>".into(),
                points: vec![(0.0, 1.2), (1.0, 0.7), (2.0, f64::NAN), (3.0, 0.4)],
            },
        ];
        let svg = line_plot_svg("losses", "epoch", "loss", &series);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("train"));
        // Labels are escaped for XML.
        assert!(svg.contains("val&lt;1&gt;"));
        assert!(!svg.contains("val<1>"));
        assert_eq!(svg, line_plot_svg("losses", "epoch", "loss", &series));
    }

    #[test]
    fn write_text_creates_parent_directories() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a/b/report.csv");
        write_text(&path, "x,y\n1,2\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "x,y\n1,2\n");
    }
}
