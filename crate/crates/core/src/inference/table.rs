//! Precomputed per-sample, per-exit quantities for policy evaluation.
//!
//! Sweeping hundreds of operating points over the same model and split
//! only needs each head's confidence and prediction once; the table
//! caches exactly that. Per-sample rows are computed through the
//! executor seam (index-ordered merge), so threaded and sequential
//! builds are bit-identical.

use crate::error::{Error, Result};
use crate::exec;
use crate::inference::confidence::{confidence, Criterion};
use crate::inference::policy::{decide_from_cached, ExitPolicy, Prediction};
use crate::multiexit::cost::CostModel;
use crate::multiexit::model::{Labels, MultiExitModel, Task};
use crate::numerics::tensor::Tensor;

/// Cached exit-wise views of one dataset split under one model.
#[derive(Debug, Clone)]
pub struct ExitTable {
    pub task: Task,
    /// Number of exits K.
    pub k: usize,
    pub labels: Labels,
    /// `[sample][exit]` max-softmax confidence (classification only).
    pub max_prob: Vec<Vec<f64>>,
    /// `[sample][exit]` normalized-entropy confidence (classification
    /// only).
    pub norm_entropy: Vec<Vec<f64>>,
    /// `[sample][exit]` prediction of each head.
    pub preds: Vec<Vec<Prediction>>,
}

impl ExitTable {
    pub fn n(&self) -> usize {
        self.preds.len()
    }

    /// The cached confidence row a threshold policy reads, if any.
    fn conf_row(&self, policy: &ExitPolicy, i: usize) -> &[f64] {
        match policy {
            ExitPolicy::Threshold { criterion: Criterion::MaxProb, .. } => &self.max_prob[i],
            ExitPolicy::Threshold { criterion: Criterion::NormEntropy, .. } => {
                &self.norm_entropy[i]
            }
            ExitPolicy::Patience { .. } => &[],
        }
    }
}

/// Runs the model once over the split and caches every head's confidence
/// and prediction per sample.
pub fn build_exit_table(model: &MultiExitModel, x: &Tensor, y: &Labels) -> Result<ExitTable> {
    if x.rows() == 0 {
        return Err(Error::InvalidParameter("cannot evaluate an empty split".into()));
    }
    if x.rows() != y.len() {
        return Err(Error::LayoutMismatch(format!(
            "{} rows vs {} labels",
            x.rows(),
            y.len()
        )));
    }
    let out = model.forward_all(x, false)?;
    let task = model.spec.task;
    let k = model.spec.num_exits();
    let n = x.rows();

    let rows = exec::map_indexed(n, |i| {
        let mut mp = Vec::new();
        let mut ne = Vec::new();
        let mut pr = Vec::with_capacity(k);
        for logits in &out.logits {
            let row = logits.row(i);
            match task {
                Task::Classification { .. } => {
                    mp.push(confidence(row, Criterion::MaxProb));
                    ne.push(confidence(row, Criterion::NormEntropy));
                    let mut best = 0;
                    for (j, &v) in row.iter().enumerate() {
                        if v > row[best] {
                            best = j;
                        }
                    }
                    pr.push(Prediction::Class(best));
                }
                Task::Regression => pr.push(Prediction::Value(row[0])),
            }
        }
        (mp, ne, pr)
    });

    let mut table = ExitTable {
        task,
        k,
        labels: y.clone(),
        max_prob: Vec::with_capacity(n),
        norm_entropy: Vec::with_capacity(n),
        preds: Vec::with_capacity(n),
    };
    for (mp, ne, pr) in rows {
        table.max_prob.push(mp);
        table.norm_entropy.push(ne);
        table.preds.push(pr);
    }
    Ok(table)
}

/// One policy's measured trade-off on one split.
#[derive(Debug, Clone)]
pub struct OperatingPoint {
    /// The swept parameter (τ or t).
    pub parameter: f64,
    /// Mean per-sample cost as a fraction of the full network's cost.
    pub mean_cost: f64,
    /// Accuracy (classification) or MSE (regression) of the taken exits.
    pub metric: f64,
    /// Samples leaving at each exit, `histogram[k-1]` for exit k.
    pub histogram: Vec<usize>,
}

/// Simulates the policy on every cached sample: walk heads in order,
/// stop where the policy fires, charge that exit's cost, and score its
/// prediction. Costs are accumulated as exact integers and divided once.
pub fn operating_point_from_table(
    table: &ExitTable,
    policy: &ExitPolicy,
    cm: &CostModel,
) -> Result<OperatingPoint> {
    policy.validate(table.k, &table.task)?;
    if cm.num_exits() != table.k {
        return Err(Error::LayoutMismatch(format!(
            "cost model has {} exits, table has {}",
            cm.num_exits(),
            table.k
        )));
    }
    let n = table.n();
    let mut histogram = vec![0usize; table.k];
    let mut flops: u64 = 0;
    let mut correct = 0usize;
    let mut sse = 0.0f64;
    for i in 0..n {
        let exit = decide_from_cached(policy, table.conf_row(policy, i), &table.preds[i]);
        histogram[exit - 1] += 1;
        flops += cm.exit_cost(exit);
        match (&table.labels, table.preds[i][exit - 1]) {
            (Labels::Classes(ids), Prediction::Class(c)) => {
                if c == ids[i] {
                    correct += 1;
                }
            }
            (Labels::Values(vals), Prediction::Value(v)) => {
                let d = v - vals[i];
                sse += d * d;
            }
            _ => {
                return Err(Error::LayoutMismatch(
                    "prediction kind does not match labels".into(),
                ))
            }
        }
    }
    let metric = match table.task {
        Task::Classification { .. } => correct as f64 / n as f64,
        Task::Regression => sse / n as f64,
    };
    Ok(OperatingPoint {
        parameter: policy.parameter(),
        mean_cost: flops as f64 / (n as u64 * cm.backbone_cost) as f64,
        metric,
        histogram,
    })
}

/// Convenience wrapper: build the table for the split and measure one
/// policy on it.
pub fn evaluate_operating_point(
    model: &MultiExitModel,
    policy: &ExitPolicy,
    x: &Tensor,
    y: &Labels,
    cm: &CostModel,
) -> Result<OperatingPoint> {
    let table = build_exit_table(model, x, y)?;
    operating_point_from_table(&table, policy, cm)
}
