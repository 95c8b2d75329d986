//! Multi-exit model: a dense ReLU backbone with a classifier (or
//! regressor) head attached after selected blocks.
//!
//! Block `i` maps the previous width to the constant hidden width with one
//! dense layer plus ReLU. A head at placement `p` reads the activation of
//! block `p`; the head at the largest placement is the network's final
//! output. Exits are numbered `1..=K` in placement order.
//!
//! Parameters are named `block{i}.w` / `block{i}.b` and `head{p}.w` /
//! `head{p}.b` (`head{p}.w1/b1/w2/b2` for two-layer heads) and initialized
//! from per-name random streams, so the presence of one parameter never
//! shifts the initial values of another — adding an exit leaves the
//! backbone (and every other head) bit-identical at init.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::graph::{Graph, NodeId};
use crate::numerics::params::Params;
use crate::numerics::rng::kaiming_uniform;
use crate::numerics::tensor::Tensor;

/// Leaf name binding the input batch in model graphs.
pub const INPUT_LEAF: &str = "input";
/// Leaf name binding the target batch in model loss graphs.
pub const TARGET_LEAF: &str = "targets";

/// What the network predicts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification { classes: usize },
    Regression,
}

impl Task {
    /// Width of every head's output layer.
    pub fn output_dim(&self) -> usize {
        match self {
            Task::Classification { classes } => *classes,
            Task::Regression => 1,
        }
    }

    /// Whether the validation metric improves upward (accuracy) or
    /// downward (mean squared error).
    pub fn higher_is_better(&self) -> bool {
        matches!(self, Task::Classification { .. })
    }
}

/// Shape shared by every head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadShape {
    /// Single dense layer: hidden -> output.
    Linear,
    /// Dense -> ReLU -> dense with the given intermediate width.
    TwoLayer { hidden: usize },
}

impl Default for HeadShape {
    fn default() -> Self {
        HeadShape::Linear
    }
}

/// Complete architectural description; two models with equal specs have
/// identical parameter layouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// Backbone depth L.
    pub blocks: usize,
    /// Head placements: strictly increasing block indices in `[1, blocks]`.
    pub placements: Vec<usize>,
    pub head: HeadShape,
    pub task: Task,
    /// Seed for the per-parameter init streams.
    pub init_seed: u64,
}

impl ModelSpec {
    /// Number of exits K.
    pub fn num_exits(&self) -> usize {
        self.placements.len()
    }

    /// Deepest block any exit reads; blocks behind it are never executed.
    pub fn live_blocks(&self) -> usize {
        *self.placements.last().expect("validated: placements nonempty")
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.blocks == 0 {
            return Err(Error::InvalidParameter(format!(
                "model dimensions must be positive (input {}, hidden {}, blocks {})",
                self.input_dim, self.hidden_dim, self.blocks
            )));
        }
        if let Task::Classification { classes } = self.task {
            if classes < 2 {
                return Err(Error::InvalidParameter(format!(
                    "classification needs at least 2 classes, got {classes}"
                )));
            }
        }
        if let HeadShape::TwoLayer { hidden } = self.head {
            if hidden == 0 {
                return Err(Error::InvalidParameter("two-layer head hidden width must be positive".into()));
            }
        }
        if self.placements.is_empty() {
            return Err(Error::InvalidPlacement("at least one head placement is required".into()));
        }
        for (i, &p) in self.placements.iter().enumerate() {
            if p < 1 || p > self.blocks {
                return Err(Error::InvalidPlacement(format!(
                    "placement {p} outside [1, {}]",
                    self.blocks
                )));
            }
            if i > 0 && self.placements[i - 1] >= p {
                return Err(Error::InvalidPlacement(format!(
                    "placements must be strictly increasing, got {:?}",
                    self.placements
                )));
            }
        }
        Ok(())
    }

    /// Parameter names of backbone block `i` (1-based).
    pub fn block_params(&self, i: usize) -> [String; 2] {
        [format!("block{i}.w"), format!("block{i}.b")]
    }

    /// Parameter names of the head at exit `k` (1-based).
    pub fn head_params(&self, k: usize) -> Vec<String> {
        let p = self.placements[k - 1];
        match self.head {
            HeadShape::Linear => vec![format!("head{p}.w"), format!("head{p}.b")],
            HeadShape::TwoLayer { .. } => vec![
                format!("head{p}.w1"),
                format!("head{p}.b1"),
                format!("head{p}.w2"),
                format!("head{p}.b2"),
            ],
        }
    }

    /// Canonical parameter order: blocks by index, then heads by exit.
    /// Flattening, hashing, and checkpoints all use this order.
    pub fn param_order(&self) -> Vec<String> {
        let mut names = Vec::new();
        for i in 1..=self.blocks {
            names.extend(self.block_params(i));
        }
        for k in 1..=self.num_exits() {
            names.extend(self.head_params(k));
        }
        names
    }

    /// Backbone parameter names for live blocks only (the flattening
    /// order used by gradient instruments).
    pub fn backbone_param_order(&self) -> Vec<String> {
        let mut names = Vec::new();
        for i in 1..=self.live_blocks() {
            names.extend(self.block_params(i));
        }
        names
    }

    /// Input width of block `i` (1-based).
    pub fn block_in_dim(&self, i: usize) -> usize {
        if i == 1 {
            self.input_dim
        } else {
            self.hidden_dim
        }
    }
}

/// A spec plus its current parameter values.
#[derive(Debug, Clone)]
pub struct MultiExitModel {
    pub spec: ModelSpec,
    pub params: Params,
}

/// Validates the spec and initializes parameters: Kaiming-uniform
/// (fan-in) weight matrices, zero biases, each weight matrix drawn from
/// the stream named after it.
pub fn build_model(spec: &ModelSpec) -> Result<MultiExitModel> {
    spec.validate()?;
    let mut params = Params::new();
    let seed = spec.init_seed;
    for i in 1..=spec.blocks {
        let [w, b] = spec.block_params(i);
        params.insert(
            w.clone(),
            kaiming_uniform(seed, &w, spec.block_in_dim(i), spec.hidden_dim),
        );
        params.insert(b, Tensor::zeros(&[spec.hidden_dim]));
    }
    let out = spec.task.output_dim();
    for k in 1..=spec.num_exits() {
        match spec.head {
            HeadShape::Linear => {
                let names = spec.head_params(k);
                params.insert(
                    names[0].clone(),
                    kaiming_uniform(seed, &names[0], spec.hidden_dim, out),
                );
                params.insert(names[1].clone(), Tensor::zeros(&[out]));
            }
            HeadShape::TwoLayer { hidden } => {
                let names = spec.head_params(k);
                params.insert(
                    names[0].clone(),
                    kaiming_uniform(seed, &names[0], spec.hidden_dim, hidden),
                );
                params.insert(names[1].clone(), Tensor::zeros(&[hidden]));
                params.insert(
                    names[2].clone(),
                    kaiming_uniform(seed, &names[2], hidden, out),
                );
                params.insert(names[3].clone(), Tensor::zeros(&[out]));
            }
        }
    }
    Ok(MultiExitModel { spec: spec.clone(), params })
}

/// Targets for a batch, matching the model task.
#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    /// Class indices in `[0, classes)`.
    Classes(Vec<usize>),
    /// Scalar regression targets.
    Values(Vec<f64>),
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Classes(v) => v.len(),
            Labels::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Gathers a sub-batch by index (repeats allowed).
    pub fn gather(&self, indices: &[usize]) -> Labels {
        match self {
            Labels::Classes(v) => Labels::Classes(indices.iter().map(|&i| v[i]).collect()),
            Labels::Values(v) => Labels::Values(indices.iter().map(|&i| v[i]).collect()),
        }
    }
}

/// Encodes labels as the loss-graph target tensor: one-hot `[n, C]` for
/// classification, `[n, 1]` for regression. Errors on task mismatch or an
/// out-of-range class id.
pub fn target_tensor(task: &Task, labels: &Labels) -> Result<Tensor> {
    match (task, labels) {
        (Task::Classification { classes }, Labels::Classes(ids)) => {
            let mut data = vec![0.0; ids.len() * classes];
            for (i, &c) in ids.iter().enumerate() {
                if c >= *classes {
                    return Err(Error::InvalidParameter(format!(
                        "class id {c} outside [0, {classes})"
                    )));
                }
                data[i * classes + c] = 1.0;
            }
            Tensor::new(vec![ids.len(), *classes], data)
        }
        (Task::Regression, Labels::Values(vals)) => {
            Tensor::new(vec![vals.len(), 1], vals.clone())
        }
        _ => Err(Error::LayoutMismatch("labels do not match the model task".into())),
    }
}

/// A built graph for a subset of exits, with the node ids instruments and
/// training need.
pub struct ModelGraph {
    pub graph: Graph,
    /// Participating exits, 1-based, increasing.
    pub exits: Vec<usize>,
    /// Logits node per participating exit.
    pub logits: Vec<NodeId>,
    /// Post-ReLU activation node per built block (block 1 first).
    pub activations: Vec<NodeId>,
    /// Scalar per-exit loss node per participating exit (empty when the
    /// graph was built without losses).
    pub losses: Vec<NodeId>,
}

impl MultiExitModel {
    /// Builds the op graph for the given exits (1-based, strictly
    /// increasing). Blocks are instantiated up to the deepest requested
    /// placement. With `with_loss`, a per-exit scalar loss node (mean over
    /// the batch of cross-entropy or MSE) is attached to every requested
    /// exit and a `targets` leaf is added.
    pub fn build_graph(&self, exits: &[usize], with_loss: bool) -> Result<ModelGraph> {
        let k_total = self.spec.num_exits();
        if exits.is_empty() {
            return Err(Error::InvalidParameter("at least one exit must participate".into()));
        }
        for (i, &k) in exits.iter().enumerate() {
            if k < 1 || k > k_total {
                return Err(Error::InvalidParameter(format!("exit {k} outside [1, {k_total}]")));
            }
            if i > 0 && exits[i - 1] >= k {
                return Err(Error::InvalidParameter(format!(
                    "exits must be strictly increasing, got {exits:?}"
                )));
            }
        }

        let mut graph = Graph::new();
        let input = graph.leaf(INPUT_LEAF);
        let targets = with_loss.then(|| graph.leaf(TARGET_LEAF));

        let deepest = self.spec.placements[exits.last().unwrap() - 1];
        let mut activations = Vec::with_capacity(deepest);
        let mut prev = input;
        for i in 1..=deepest {
            let [w, b] = self.spec.block_params(i);
            let w = graph.leaf(&w);
            let b = graph.leaf(&b);
            let z = graph.matmul(prev, w);
            let z = graph.add_bias(z, b);
            prev = graph.relu(z);
            activations.push(prev);
        }

        let mut logits = Vec::with_capacity(exits.len());
        let mut losses = Vec::new();
        for &k in exits {
            let p = self.spec.placements[k - 1];
            let attach = activations[p - 1];
            let names = self.spec.head_params(k);
            let head_out = match self.spec.head {
                HeadShape::Linear => {
                    let w = graph.leaf(&names[0]);
                    let b = graph.leaf(&names[1]);
                    let z = graph.matmul(attach, w);
                    graph.add_bias(z, b)
                }
                HeadShape::TwoLayer { .. } => {
                    let w1 = graph.leaf(&names[0]);
                    let b1 = graph.leaf(&names[1]);
                    let w2 = graph.leaf(&names[2]);
                    let b2 = graph.leaf(&names[3]);
                    let z = graph.matmul(attach, w1);
                    let z = graph.add_bias(z, b1);
                    let h = graph.relu(z);
                    let z = graph.matmul(h, w2);
                    graph.add_bias(z, b2)
                }
            };
            logits.push(head_out);
            if let Some(t) = targets {
                let per_row = match self.spec.task {
                    Task::Classification { .. } => graph.softmax_cross_entropy(head_out, t),
                    Task::Regression => graph.mean_squared_error(head_out, t),
                };
                losses.push(graph.mean_over_batch(per_row));
            }
        }

        Ok(ModelGraph {
            graph,
            exits: exits.to_vec(),
            logits,
            activations,
            losses,
        })
    }

    /// All exits, 1-based.
    pub fn all_exits(&self) -> Vec<usize> {
        (1..=self.spec.num_exits()).collect()
    }

    /// Leaf bindings for a batch: the current parameters plus the input
    /// (and encoded targets when given).
    pub fn bindings(&self, x: &Tensor, y: Option<&Labels>) -> Result<Params> {
        let mut b = self.params.clone();
        b.insert(INPUT_LEAF.to_string(), x.clone());
        if let Some(labels) = y {
            b.insert(TARGET_LEAF.to_string(), target_tensor(&self.spec.task, labels)?);
        }
        Ok(b)
    }

    /// Runs the backbone once and returns the logits of every exit, plus
    /// the per-block activations when `capture` is set.
    pub fn forward_all(&self, x: &Tensor, capture: bool) -> Result<ExitOutputs> {
        let exits = self.all_exits();
        let mut mg = self.build_graph(&exits, false)?;
        mg.graph.forward(&self.bindings(x, None)?)?;
        let logits = mg
            .logits
            .iter()
            .map(|&id| mg.graph.value(id).cloned())
            .collect::<Result<Vec<_>>>()?;
        let activations = if capture {
            mg.activations
                .iter()
                .map(|&id| mg.graph.value(id).cloned())
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        Ok(ExitOutputs { logits, activations })
    }

    /// Per-exit losses and the weighted total `sum_k alpha_k * L_k` on one
    /// batch. `alpha` must have one weight per exit.
    pub fn multi_exit_loss(&self, x: &Tensor, y: &Labels, alpha: &[f64]) -> Result<(f64, Vec<f64>)> {
        let k = self.spec.num_exits();
        if alpha.len() != k {
            return Err(Error::LayoutMismatch(format!(
                "{} loss weights for {k} exits",
                alpha.len()
            )));
        }
        let exits = self.all_exits();
        let mut mg = self.build_graph(&exits, true)?;
        mg.graph.forward(&self.bindings(x, Some(y))?)?;
        let per_exit: Vec<f64> = mg
            .losses
            .iter()
            .map(|&id| mg.graph.value(id).map(Tensor::item))
            .collect::<Result<Vec<_>>>()?;
        let total = per_exit
            .iter()
            .zip(alpha)
            .map(|(l, a)| a * l)
            .sum();
        Ok((total, per_exit))
    }
}

/// Result of [`MultiExitModel::forward_all`].
#[derive(Debug, Clone)]
pub struct ExitOutputs {
    /// `[n, output_dim]` logits per exit, in exit order.
    pub logits: Vec<Tensor>,
    /// Post-ReLU `[n, hidden]` activations per live block (empty unless
    /// captured).
    pub activations: Vec<Tensor>,
}

/// Row-wise argmax; ties resolve to the lowest index.
pub fn argmax_rows(logits: &Tensor) -> Vec<usize> {
    (0..logits.rows())
        .map(|i| {
            let row = logits.row(i);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Validation metric of one exit's outputs: accuracy for classification,
/// mean squared error for regression.
pub fn metric_of(task: &Task, logits: &Tensor, labels: &Labels) -> Result<f64> {
    match (task, labels) {
        (Task::Classification { .. }, Labels::Classes(ids)) => {
            if logits.rows() != ids.len() {
                return Err(Error::LayoutMismatch(format!(
                    "{} logit rows vs {} labels",
                    logits.rows(),
                    ids.len()
                )));
            }
            let preds = argmax_rows(logits);
            let correct = preds.iter().zip(ids).filter(|(p, y)| p == y).count();
            Ok(correct as f64 / ids.len() as f64)
        }
        (Task::Regression, Labels::Values(vals)) => {
            if logits.rows() != vals.len() || logits.cols() != 1 {
                return Err(Error::LayoutMismatch(format!(
                    "regression outputs {:?} vs {} targets",
                    logits.shape(),
                    vals.len()
                )));
            }
            let mse = logits
                .data()
                .iter()
                .zip(vals)
                .map(|(p, t)| (p - t) * (p - t))
                .sum::<f64>()
                / vals.len() as f64;
            Ok(mse)
        }
        _ => Err(Error::LayoutMismatch("labels do not match the model task".into())),
    }
}
