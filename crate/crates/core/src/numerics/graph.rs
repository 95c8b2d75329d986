//! Reverse-mode automatic differentiation over a static operation graph.
//!
//! A [`Graph`] is a topologically ordered list of op records built once per
//! model topology and re-evaluated with fresh leaf bindings each step.
//! `forward` caches every node's value; `grad` runs reverse accumulation
//! from one or more scalar roots over the cached values.
//!
//! The op set is deliberately small: matrix multiply, bias broadcast over
//! rows, ReLU, fused softmax cross-entropy (log-sum-exp stabilized),
//! mean-squared error, concatenation, and mean over the batch axis. Losses
//! never propagate gradients into their target operand — targets are data.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numerics::params::Params;
use crate::numerics::tensor::Tensor;

/// Index of a node inside its graph.
pub type NodeId = usize;

#[derive(Debug, Clone)]
enum Op {
    Leaf { name: String },
    MatMul { lhs: NodeId, rhs: NodeId },
    AddBias { input: NodeId, bias: NodeId },
    Relu { input: NodeId },
    SoftmaxCrossEntropy { logits: NodeId, targets: NodeId },
    MeanSquaredError { pred: NodeId, target: NodeId },
    Concat { inputs: Vec<NodeId>, axis: usize },
    MeanOverBatch { input: NodeId },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf { .. } => "leaf",
            Op::MatMul { .. } => "matmul",
            Op::AddBias { .. } => "add_bias",
            Op::Relu { .. } => "relu",
            Op::SoftmaxCrossEntropy { .. } => "softmax_cross_entropy",
            Op::MeanSquaredError { .. } => "mean_squared_error",
            Op::Concat { .. } => "concat",
            Op::MeanOverBatch { .. } => "mean_over_batch",
        }
    }
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Option<Tensor>,
}

/// Static computation graph with cached forward values.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    leaves: BTreeMap<String, NodeId>,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    fn push(&mut self, op: Op) -> NodeId {
        self.nodes.push(Node { op, value: None });
        self.nodes.len() - 1
    }

    /// Named input/parameter node. Re-declaring an existing name returns
    /// the original node, so one leaf serves every consumer.
    pub fn leaf(&mut self, name: &str) -> NodeId {
        if let Some(&id) = self.leaves.get(name) {
            return id;
        }
        let id = self.push(Op::Leaf { name: name.to_string() });
        self.leaves.insert(name.to_string(), id);
        id
    }

    /// Matrix product `[n,k] x [k,m] -> [n,m]`.
    pub fn matmul(&mut self, lhs: NodeId, rhs: NodeId) -> NodeId {
        self.push(Op::MatMul { lhs, rhs })
    }

    /// Adds a bias vector `[m]` to every row of `[n,m]`.
    pub fn add_bias(&mut self, input: NodeId, bias: NodeId) -> NodeId {
        self.push(Op::AddBias { input, bias })
    }

    /// Element-wise `max(x, 0)`.
    pub fn relu(&mut self, input: NodeId) -> NodeId {
        self.push(Op::Relu { input })
    }

    /// Fused softmax + cross-entropy, stabilized via log-sum-exp.
    /// `logits` and `targets` are both `[n,C]` (targets one-hot or soft);
    /// the result is the per-row loss `[n]`. Gradients flow to `logits`
    /// only.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, targets: NodeId) -> NodeId {
        self.push(Op::SoftmaxCrossEntropy { logits, targets })
    }

    /// Per-row mean squared error between `[n,m]` tensors, giving `[n]`.
    /// Gradients flow to `pred` only.
    pub fn mean_squared_error(&mut self, pred: NodeId, target: NodeId) -> NodeId {
        self.push(Op::MeanSquaredError { pred, target })
    }

    /// Concatenates rank-2 tensors along `axis` (0 = rows, 1 = columns).
    pub fn concat(&mut self, inputs: &[NodeId], axis: usize) -> NodeId {
        self.push(Op::Concat { inputs: inputs.to_vec(), axis })
    }

    /// Mean over the leading axis: `[n] -> scalar`, `[n,m] -> [m]`.
    pub fn mean_over_batch(&mut self, input: NodeId) -> NodeId {
        self.push(Op::MeanOverBatch { input })
    }

    /// The most recently added node (the root of single-sink graphs).
    pub fn root(&self) -> NodeId {
        assert!(!self.nodes.is_empty(), "empty graph has no root");
        self.nodes.len() - 1
    }

    /// Cached value of a node; errors until `forward` has run.
    pub fn value(&self, id: NodeId) -> Result<&Tensor> {
        self.nodes[id]
            .value
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter(format!("node {id} has no cached value; run forward first")))
    }

    /// Evaluates every node in topological order, caching values.
    ///
    /// Errors on a missing leaf binding, on any shape mismatch (naming the
    /// offending node), and if any computed value is NaN or infinite.
    pub fn forward(&mut self, bindings: &Params) -> Result<()> {
        for id in 0..self.nodes.len() {
            let value = self.eval(id, bindings)?;
            if !value.all_finite() {
                return Err(Error::NonFinite { node: id, op: self.nodes[id].op.name() });
            }
            self.nodes[id].value = Some(value);
        }
        Ok(())
    }

    /// `forward` followed by cloning the root value — convenience for
    /// single-sink graphs.
    pub fn forward_root(&mut self, bindings: &Params) -> Result<Tensor> {
        self.forward(bindings)?;
        Ok(self.value(self.root())?.clone())
    }

    fn shape_err(&self, id: NodeId, detail: String) -> Error {
        Error::ShapeMismatch { node: id, op: self.nodes[id].op.name(), detail }
    }

    fn eval(&self, id: NodeId, bindings: &Params) -> Result<Tensor> {
        let cached = |input: NodeId| -> &Tensor {
            self.nodes[input]
                .value
                .as_ref()
                .expect("internal: inputs precede consumers in topological order")
        };
        match &self.nodes[id].op {
            Op::Leaf { name } => bindings
                .get(name)
                .cloned()
                .ok_or_else(|| Error::UnboundLeaf(name.clone())),
            Op::MatMul { lhs, rhs } => {
                let (a, b) = (cached(*lhs), cached(*rhs));
                if a.shape().len() != 2 || b.shape().len() != 2 {
                    return Err(self.shape_err(
                        id,
                        format!("matmul needs rank-2 operands, got {:?} and {:?}", a.shape(), b.shape()),
                    ));
                }
                if a.cols() != b.rows() {
                    return Err(self.shape_err(
                        id,
                        format!("inner dimensions differ: {:?} x {:?}", a.shape(), b.shape()),
                    ));
                }
                Ok(a.matmul(b))
            }
            Op::AddBias { input, bias } => {
                let (x, b) = (cached(*input), cached(*bias));
                if x.shape().len() != 2 || b.shape().len() != 1 || b.shape()[0] != x.cols() {
                    return Err(self.shape_err(
                        id,
                        format!("expected [n,m] and [m], got {:?} and {:?}", x.shape(), b.shape()),
                    ));
                }
                let m = x.cols();
                let data = x
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v + b.data()[i % m])
                    .collect();
                Tensor::new(x.shape().to_vec(), data)
            }
            Op::Relu { input } => {
                let x = cached(*input);
                let data = x.data().iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
                Tensor::new(x.shape().to_vec(), data)
            }
            Op::SoftmaxCrossEntropy { logits, targets } => {
                let (l, y) = (cached(*logits), cached(*targets));
                if l.shape().len() != 2 || l.shape() != y.shape() {
                    return Err(self.shape_err(
                        id,
                        format!("expected matching [n,C] operands, got {:?} and {:?}", l.shape(), y.shape()),
                    ));
                }
                let n = l.rows();
                let mut out = Vec::with_capacity(n);
                for i in 0..n {
                    let row = l.row(i);
                    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                    let dot: f64 = y.row(i).iter().zip(row).map(|(t, v)| t * v).sum();
                    out.push(lse - dot);
                }
                Tensor::new(vec![n], out)
            }
            Op::MeanSquaredError { pred, target } => {
                let (p, t) = (cached(*pred), cached(*target));
                if p.shape().len() != 2 || p.shape() != t.shape() {
                    return Err(self.shape_err(
                        id,
                        format!("expected matching [n,m] operands, got {:?} and {:?}", p.shape(), t.shape()),
                    ));
                }
                let m = p.cols() as f64;
                let out = (0..p.rows())
                    .map(|i| {
                        p.row(i)
                            .iter()
                            .zip(t.row(i))
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            / m
                    })
                    .collect();
                Tensor::new(vec![p.rows()], out)
            }
            Op::Concat { inputs, axis } => {
                if inputs.is_empty() || *axis > 1 {
                    return Err(self.shape_err(id, format!("concat needs inputs and axis in {{0,1}}, got axis {axis}")));
                }
                let first = cached(inputs[0]);
                if first.shape().len() != 2 {
                    return Err(self.shape_err(id, format!("concat needs rank-2 inputs, got {:?}", first.shape())));
                }
                for &i in inputs {
                    let t = cached(i);
                    let same = if *axis == 0 { t.shape().len() == 2 && t.cols() == first.cols() } else { t.shape().len() == 2 && t.rows() == first.rows() };
                    if !same {
                        return Err(self.shape_err(
                            id,
                            format!("input shapes {:?} and {:?} disagree off axis {axis}", first.shape(), t.shape()),
                        ));
                    }
                }
                if *axis == 0 {
                    let cols = first.cols();
                    let mut data = Vec::new();
                    let mut rows = 0;
                    for &i in inputs {
                        let t = cached(i);
                        rows += t.rows();
                        data.extend_from_slice(t.data());
                    }
                    Tensor::new(vec![rows, cols], data)
                } else {
                    let rows = first.rows();
                    let total_cols: usize = inputs.iter().map(|&i| cached(i).cols()).sum();
                    let mut data = Vec::with_capacity(rows * total_cols);
                    for r in 0..rows {
                        for &i in inputs {
                            data.extend_from_slice(cached(i).row(r));
                        }
                    }
                    Tensor::new(vec![rows, total_cols], data)
                }
            }
            Op::MeanOverBatch { input } => {
                let x = cached(*input);
                match x.shape().len() {
                    1 => {
                        let n = x.shape()[0] as f64;
                        Ok(Tensor::scalar(x.data().iter().sum::<f64>() / n))
                    }
                    2 => {
                        let (n, m) = (x.rows(), x.cols());
                        let mut out = vec![0.0; m];
                        for i in 0..n {
                            for (j, v) in x.row(i).iter().enumerate() {
                                out[j] += v;
                            }
                        }
                        for v in &mut out {
                            *v /= n as f64;
                        }
                        Tensor::new(vec![m], out)
                    }
                    _ => Err(self.shape_err(id, format!("expected rank 1 or 2, got {:?}", x.shape()))),
                }
            }
        }
    }

    /// Gradients of the root node with respect to the named leaves.
    ///
    /// `forward` must have run. The root must be scalar. Leaves with no
    /// path to the root get zero tensors of their bound shape; names that
    /// are not leaves of this graph are an error.
    pub fn grad(&self, wrt: &[String]) -> Result<Params> {
        self.grad_weighted(&[(self.root(), 1.0)], wrt)
    }

    /// Reverse accumulation seeded with `weight` at each scalar root —
    /// the gradient of `sum_i weight_i * root_i`. This is how a weighted
    /// multi-exit objective is differentiated without materializing the
    /// weighted sum as a node.
    pub fn grad_weighted(&self, roots: &[(NodeId, f64)], wrt: &[String]) -> Result<Params> {
        let mut adjoints: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        for &(root, weight) in roots {
            let value = self.value(root)?;
            if !value.is_scalar() {
                return Err(Error::NonScalarRoot { shape: value.shape().to_vec() });
            }
            let mut seed = Tensor::zeros(value.shape());
            seed.data_mut()[0] = weight;
            accumulate(&mut adjoints, root, seed);
        }

        // Consumers always have larger ids than their inputs, so one
        // reverse pass sees every node's full adjoint before it fires.
        for id in (0..self.nodes.len()).rev() {
            let Some(u) = adjoints[id].clone() else { continue };
            match &self.nodes[id].op {
                Op::Leaf { .. } => {}
                Op::MatMul { lhs, rhs } => {
                    let (a, b) = (self.value(*lhs)?, self.value(*rhs)?);
                    accumulate(&mut adjoints, *lhs, u.matmul(&b.transpose()));
                    accumulate(&mut adjoints, *rhs, a.transpose().matmul(&u));
                }
                Op::AddBias { input, bias } => {
                    let m = u.cols();
                    let mut db = vec![0.0; m];
                    for i in 0..u.rows() {
                        for (j, v) in u.row(i).iter().enumerate() {
                            db[j] += v;
                        }
                    }
                    accumulate(&mut adjoints, *input, u.clone());
                    accumulate(&mut adjoints, *bias, Tensor::vector(db));
                }
                Op::Relu { input } => {
                    let x = self.value(*input)?;
                    let data = x
                        .data()
                        .iter()
                        .zip(u.data())
                        .map(|(&xv, &uv)| if xv > 0.0 { uv } else { 0.0 })
                        .collect();
                    accumulate(&mut adjoints, *input, Tensor::new(x.shape().to_vec(), data)?);
                }
                Op::SoftmaxCrossEntropy { logits, targets } => {
                    let (l, y) = (self.value(*logits)?, self.value(*targets)?);
                    let (n, c) = (l.rows(), l.cols());
                    let mut dl = vec![0.0; n * c];
                    for i in 0..n {
                        let row = l.row(i);
                        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let denom: f64 = row.iter().map(|v| (v - max).exp()).sum();
                        let ui = u.data()[i];
                        for j in 0..c {
                            let p = (row[j] - max).exp() / denom;
                            dl[i * c + j] = ui * (p - y.row(i)[j]);
                        }
                    }
                    accumulate(&mut adjoints, *logits, Tensor::new(vec![n, c], dl)?);
                    // No gradient into targets: they are data.
                }
                Op::MeanSquaredError { pred, target } => {
                    let (p, t) = (self.value(*pred)?, self.value(*target)?);
                    let (n, m) = (p.rows(), p.cols());
                    let mut dp = vec![0.0; n * m];
                    for i in 0..n {
                        let ui = u.data()[i];
                        for j in 0..m {
                            dp[i * m + j] = ui * 2.0 * (p.row(i)[j] - t.row(i)[j]) / m as f64;
                        }
                    }
                    accumulate(&mut adjoints, *pred, Tensor::new(vec![n, m], dp)?);
                }
                Op::Concat { inputs, axis } => {
                    if *axis == 0 {
                        let mut offset = 0;
                        for &i in inputs {
                            let t = self.value(i)?;
                            let rows = t.rows();
                            let cols = t.cols();
                            let slice = u.data()[offset * cols..(offset + rows) * cols].to_vec();
                            accumulate(&mut adjoints, i, Tensor::new(vec![rows, cols], slice)?);
                            offset += rows;
                        }
                    } else {
                        let rows = u.rows();
                        let mut offset = 0;
                        for &i in inputs {
                            let t = self.value(i)?;
                            let cols = t.cols();
                            let mut data = Vec::with_capacity(rows * cols);
                            for r in 0..rows {
                                let urow = u.row(r);
                                data.extend_from_slice(&urow[offset..offset + cols]);
                            }
                            accumulate(&mut adjoints, i, Tensor::new(vec![rows, cols], data)?);
                            offset += cols;
                        }
                    }
                }
                Op::MeanOverBatch { input } => {
                    let x = self.value(*input)?;
                    match x.shape().len() {
                        1 => {
                            let n = x.shape()[0];
                            let v = u.item() / n as f64;
                            accumulate(&mut adjoints, *input, Tensor::vector(vec![v; n]))
                        }
                        _ => {
                            let (n, m) = (x.rows(), x.cols());
                            let mut data = Vec::with_capacity(n * m);
                            for _ in 0..n {
                                for j in 0..m {
                                    data.push(u.data()[j] / n as f64);
                                }
                            }
                            accumulate(&mut adjoints, *input, Tensor::new(vec![n, m], data)?)
                        }
                    }
                }
            }
        }

        let mut out = Params::new();
        for name in wrt {
            let &leaf = self
                .leaves
                .get(name)
                .ok_or_else(|| Error::UnknownParam(name.clone()))?;
            let grad = match adjoints[leaf].take() {
                Some(t) => t,
                None => Tensor::zeros(self.value(leaf)?.shape()),
            };
            out.insert(name.clone(), grad);
        }
        Ok(out)
    }
}

fn accumulate(adjoints: &mut [Option<Tensor>], id: NodeId, delta: Tensor) {
    match &mut adjoints[id] {
        Some(t) => t.axpy(1.0, &delta),
        slot @ None => *slot = Some(delta),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::check::{fd_grad, max_rel_err};
    use crate::numerics::rng::kaiming_uniform;

    fn bind(pairs: &[(&str, Tensor)]) -> Params {
        pairs.iter().map(|(n, t)| (n.to_string(), t.clone())).collect()
    }

    #[test]
    fn scalar_product_forward() {
        // [4, 5] . [2, 3]^T = 23
        let mut g = Graph::new();
        let x = g.leaf("x");
        let w = g.leaf("w");
        g.matmul(x, w);
        let out = g
            .forward_root(&bind(&[
                ("x", Tensor::from_rows(&[vec![4.0, 5.0]])),
                ("w", Tensor::from_rows(&[vec![2.0], vec![3.0]])),
            ]))
            .unwrap();
        assert_eq!(out.data(), &[23.0]);
    }

    #[test]
    fn relu_clamps_negatives() {
        let mut g = Graph::new();
        let x = g.leaf("x");
        g.relu(x);
        let out = g
            .forward_root(&bind(&[("x", Tensor::from_rows(&[vec![-1.5, 2.0]]))]))
            .unwrap();
        assert_eq!(out.data(), &[0.0, 2.0]);
    }

    #[test]
    fn two_layer_mlp_matches_hand_arithmetic() {
        // x = [1, -2]; z1 = x W1 + b1 = [0.1, -2.7]; a1 = [0.1, 0];
        // z2 = a1 W2 + b2 = [0.2, 0.6].
        let mut g = Graph::new();
        let x = g.leaf("x");
        let (w1, b1) = (g.leaf("w1"), g.leaf("b1"));
        let (w2, b2) = (g.leaf("w2"), g.leaf("b2"));
        let h = g.matmul(x, w1);
        let h = g.add_bias(h, b1);
        let h = g.relu(h);
        let h = g.matmul(h, w2);
        g.add_bias(h, b2);
        let out = g
            .forward_root(&bind(&[
                ("x", Tensor::from_rows(&[vec![1.0, -2.0]])),
                ("w1", Tensor::from_rows(&[vec![0.5, -1.0], vec![0.25, 0.75]])),
                ("b1", Tensor::vector(vec![0.1, -0.2])),
                ("w2", Tensor::from_rows(&[vec![2.0, 1.0], vec![-1.0, 3.0]])),
                ("b2", Tensor::vector(vec![0.0, 0.5])),
            ]))
            .unwrap();
        assert!((out.data()[0] - 0.2).abs() < 1e-12);
        assert!((out.data()[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn square_gradient_is_power_rule() {
        // f(w) = w * w through matmul with both operands the same leaf:
        // reverse accumulation must add both contributions, giving 2w.
        let mut g = Graph::new();
        let w = g.leaf("w");
        g.matmul(w, w);
        let bindings = bind(&[("w", Tensor::from_rows(&[vec![3.0]]))]);
        g.forward(&bindings).unwrap();
        let grads = g.grad(&["w".into()]).unwrap();
        assert_eq!(grads["w"].data(), &[6.0]);
    }

    #[test]
    fn cross_entropy_value_and_gradient() {
        // logits [1, 2, 3], true class 2 (zero-based):
        // loss = lse - l2 = ln(e^1 + e^2 + e^3) - 3 = 0.40760596444438...
        let mut g = Graph::new();
        let l = g.leaf("logits");
        let y = g.leaf("y");
        let per_row = g.softmax_cross_entropy(l, y);
        g.mean_over_batch(per_row);
        let bindings = bind(&[
            ("logits", Tensor::from_rows(&[vec![1.0, 2.0, 3.0]])),
            ("y", Tensor::from_rows(&[vec![0.0, 0.0, 1.0]])),
        ]);
        let loss = g.forward_root(&bindings).unwrap().item();
        assert!((loss - 0.407_605_964_444_380_3).abs() < 1e-12);

        // Gradient w.r.t. logits is softmax(l) - y (mean over 1 row).
        let grads = g.grad(&["logits".into()]).unwrap();
        let exps: Vec<f64> = [1.0, 2.0, 3.0].iter().map(|v| (v - 3.0f64).exp()).collect();
        let denom: f64 = exps.iter().sum();
        let expect = [exps[0] / denom, exps[1] / denom, exps[2] / denom - 1.0];
        for (got, want) in grads["logits"].data().iter().zip(expect) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn unused_leaf_gets_zero_gradient() {
        let mut g = Graph::new();
        let x = g.leaf("x");
        let _unused = g.leaf("spare");
        let y = g.leaf("y");
        let d = g.mean_squared_error(x, y);
        g.mean_over_batch(d);
        let bindings = bind(&[
            ("x", Tensor::from_rows(&[vec![1.0, 2.0]])),
            ("spare", Tensor::vector(vec![5.0, 6.0, 7.0])),
            ("y", Tensor::from_rows(&[vec![0.0, 0.0]])),
        ]);
        g.forward(&bindings).unwrap();
        let grads = g.grad(&["x".into(), "spare".into()]).unwrap();
        assert_eq!(grads["spare"].data(), &[0.0, 0.0, 0.0]);
        assert!(grads["x"].data().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn error_paths() {
        // Unbound leaf.
        let mut g = Graph::new();
        let x = g.leaf("x");
        g.relu(x);
        assert!(matches!(g.forward(&Params::new()), Err(Error::UnboundLeaf(_))));

        // Shape mismatch names the node.
        let mut g = Graph::new();
        let a = g.leaf("a");
        let b = g.leaf("b");
        let bad = g.matmul(a, b);
        let err = g
            .forward(&bind(&[
                ("a", Tensor::from_rows(&[vec![1.0, 2.0]])),
                ("b", Tensor::from_rows(&[vec![1.0, 2.0]])),
            ]))
            .unwrap_err();
        match err {
            Error::ShapeMismatch { node, .. } => assert_eq!(node, bad),
            other => panic!("expected shape mismatch, got {other}"),
        }

        // Non-finite input is rejected at its leaf.
        let mut g = Graph::new();
        let x = g.leaf("x");
        g.relu(x);
        let err = g
            .forward(&bind(&[("x", Tensor::vector(vec![f64::INFINITY]))]))
            .unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));

        // Non-scalar root refuses reverse accumulation.
        let mut g = Graph::new();
        let x = g.leaf("x");
        g.relu(x);
        g.forward(&bind(&[("x", Tensor::vector(vec![1.0, 2.0]))])).unwrap();
        assert!(matches!(
            g.grad(&["x".into()]),
            Err(Error::NonScalarRoot { .. })
        ));
    }

    #[test]
    fn bias_and_mean_gradients_are_sums() {
        // d/db of mean over per-row MSE must be checked against finite
        // differences like everything else.
        let mut g = Graph::new();
        let x = g.leaf("x");
        let b = g.leaf("b");
        let y = g.leaf("y");
        let z = g.add_bias(x, b);
        let e = g.mean_squared_error(z, y);
        g.mean_over_batch(e);
        let bindings = bind(&[
            ("x", Tensor::from_rows(&[vec![1.0, -1.0], vec![0.5, 2.0]])),
            ("b", Tensor::vector(vec![0.3, -0.7])),
            ("y", Tensor::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]])),
        ]);
        g.forward(&bindings).unwrap();
        let ad = g.grad(&["x".into(), "b".into()]).unwrap();
        let fd = fd_grad(&mut g, &bindings, &["x".into(), "b".into()], 1e-5).unwrap();
        assert!(max_rel_err(&ad, &fd) < 1e-8);
    }

    #[test]
    fn concat_roundtrips_gradients() {
        for axis in [0, 1] {
            let mut g = Graph::new();
            let a = g.leaf("a");
            let b = g.leaf("b");
            let c = g.concat(&[a, b], axis);
            let y = g.leaf("y");
            let e = g.mean_squared_error(c, y);
            g.mean_over_batch(e);
            let (ta, tb, ty) = if axis == 0 {
                (
                    Tensor::from_rows(&[vec![1.0, 2.0]]),
                    Tensor::from_rows(&[vec![3.0, 4.0], vec![5.0, 6.0]]),
                    Tensor::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]]),
                )
            } else {
                (
                    Tensor::from_rows(&[vec![1.0], vec![4.0]]),
                    Tensor::from_rows(&[vec![2.0, 3.0], vec![5.0, 6.0]]),
                    Tensor::from_rows(&[vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]]),
                )
            };
            let bindings = bind(&[("a", ta), ("b", tb), ("y", ty)]);
            g.forward(&bindings).unwrap();
            let ad = g.grad(&["a".into(), "b".into()]).unwrap();
            let fd = fd_grad(&mut g, &bindings, &["a".into(), "b".into()], 1e-5).unwrap();
            assert!(max_rel_err(&ad, &fd) < 1e-8, "axis {axis}");
        }
    }

    #[test]
    fn three_block_mlp_matches_finite_differences() {
        // Small seeded MLP: x -> 3 x (dense + relu) -> dense -> CE loss.
        let mut g = Graph::new();
        let x = g.leaf("x");
        let y = g.leaf("y");
        let mut h = x;
        let mut names = Vec::new();
        let dims = [(3usize, 4usize), (4, 4), (4, 4)];
        for (i, (din, dout)) in dims.iter().enumerate() {
            let w = g.leaf(&format!("w{i}"));
            let b = g.leaf(&format!("b{i}"));
            names.push(format!("w{i}"));
            names.push(format!("b{i}"));
            let _ = (din, dout);
            let z = g.matmul(h, w);
            let z = g.add_bias(z, b);
            h = g.relu(z);
        }
        let wout = g.leaf("wout");
        names.push("wout".into());
        let logits = g.matmul(h, wout);
        let ce = g.softmax_cross_entropy(logits, y);
        g.mean_over_batch(ce);

        let mut bindings = Params::new();
        bindings.insert("x".into(), kaiming_uniform(11, "x", 4, 3));
        bindings.insert(
            "y".into(),
            Tensor::from_rows(&[
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
            ]),
        );
        for (i, (din, dout)) in dims.iter().enumerate() {
            bindings.insert(format!("w{i}"), kaiming_uniform(11, &format!("w{i}"), *din, *dout));
            bindings.insert(format!("b{i}"), kaiming_uniform(11, &format!("b{i}"), *dout, 1).reshape_vector());
        }
        bindings.insert("wout".into(), kaiming_uniform(11, "wout", 4, 2));

        g.forward(&bindings).unwrap();
        let ad = g.grad(&names).unwrap();
        let fd = fd_grad(&mut g, &bindings, &names, 1e-5).unwrap();
        assert!(max_rel_err(&ad, &fd) < 1e-6);
    }

    #[test]
    fn forward_is_deterministic() {
        let mut g = Graph::new();
        let x = g.leaf("x");
        let w = g.leaf("w");
        let z = g.matmul(x, w);
        g.relu(z);
        let bindings = bind(&[
            ("x", kaiming_uniform(5, "x", 8, 6)),
            ("w", kaiming_uniform(5, "w", 6, 4)),
        ]);
        let a = g.forward_root(&bindings).unwrap();
        let b = g.forward_root(&bindings).unwrap();
        assert_eq!(a, b);
    }
}
