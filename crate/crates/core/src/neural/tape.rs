//! Reverse-mode automatic differentiation over [`Tensor`] nodes.
//!
//! Every operation appends a node holding its output value and enough
//! context to run the matching backward kernel. [`Tape::backward`] walks the
//! nodes in reverse and accumulates gradients into every node that depends
//! on a leaf created with `requires_grad = true`.

use crate::error::{Error, Result};

use super::ops;
use super::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    AddBias(NodeId, NodeId),
    Conv2d {
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: usize,
        padding: usize,
    },
    MaxPool {
        x: NodeId,
        argmax: Vec<usize>,
    },
    GlobalAvgPool(NodeId),
    Reshape(NodeId),
    Relu(NodeId),
    Softmax(NodeId),
    Concat(NodeId, NodeId),
    CrossEntropy {
        probs: NodeId,
        targets: Vec<usize>,
        weights: Vec<f64>,
    },
    SumSquares(NodeId),
    Sum(NodeId),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    differentiated: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a leaf. Gradients are only accumulated for leaves marked
    /// `requires_grad` and for nodes downstream of them.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Result<NodeId> {
        value.ensure_finite("leaf tensor")?;
        Ok(self.push(value, Op::Leaf, requires_grad))
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Gradient of the last `backward` target with respect to `id`, if any
    /// flowed into it.
    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.nodes[id.0].value.grad()
    }

    pub fn requires_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn check(&self, id: NodeId) -> Result<()> {
        if id.0 >= self.nodes.len() {
            return Err(Error::State(format!("node {} is not on this tape", id.0)));
        }
        Ok(())
    }

    fn record(&mut self, value: Tensor, op: Op, inputs: &[NodeId], name: &str) -> Result<NodeId> {
        value.ensure_finite(name)?;
        let rg = inputs.iter().any(|&i| self.nodes[i.0].requires_grad);
        Ok(self.push(value, op, rg))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check(a)?;
        self.check(b)?;
        let out = ops::matmul(self.value(a), self.value(b))?;
        self.record(out, Op::MatMul(a, b), &[a, b], "matmul")
    }

    pub fn add_bias(&mut self, x: NodeId, b: NodeId) -> Result<NodeId> {
        self.check(x)?;
        self.check(b)?;
        let out = ops::add_bias(self.value(x), self.value(b))?;
        self.record(out, Op::AddBias(x, b), &[x, b], "add_bias")
    }

    pub fn conv2d(&mut self, x: NodeId, w: NodeId, b: NodeId, stride: usize, padding: usize) -> Result<NodeId> {
        for id in [x, w, b] {
            self.check(id)?;
        }
        let out = ops::conv2d(self.value(x), self.value(w), self.value(b), stride, padding)?;
        self.record(
            out,
            Op::Conv2d {
                x,
                w,
                b,
                stride,
                padding,
            },
            &[x, w, b],
            "conv2d",
        )
    }

    pub fn maxpool2d(&mut self, x: NodeId, window: usize, stride: usize) -> Result<NodeId> {
        self.check(x)?;
        let (out, argmax) = ops::maxpool2d(self.value(x), window, stride)?;
        self.record(out, Op::MaxPool { x, argmax }, &[x], "maxpool2d")
    }

    pub fn global_avg_pool(&mut self, x: NodeId) -> Result<NodeId> {
        self.check(x)?;
        let out = ops::global_avg_pool(self.value(x))?;
        self.record(out, Op::GlobalAvgPool(x), &[x], "global_avg_pool")
    }

    /// Collapses every axis after the first: `[B, ...] -> [B, prod(...)]`.
    pub fn flatten(&mut self, x: NodeId) -> Result<NodeId> {
        self.check(x)?;
        let v = self.value(x);
        let shape = vec![v.rows(), v.row_len()];
        let out = v.clone().reshape(shape)?;
        self.record(out, Op::Reshape(x), &[x], "flatten")
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        self.check(x)?;
        let out = ops::relu(self.value(x));
        self.record(out, Op::Relu(x), &[x], "relu")
    }

    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        self.check(x)?;
        let out = ops::softmax(self.value(x))?;
        self.record(out, Op::Softmax(x), &[x], "softmax")
    }

    pub fn concat(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check(a)?;
        self.check(b)?;
        let out = ops::concat(self.value(a), self.value(b))?;
        self.record(out, Op::Concat(a, b), &[a, b], "concat")
    }

    pub fn weighted_cross_entropy(&mut self, probs: NodeId, targets: &[usize], weights: &[f64]) -> Result<NodeId> {
        self.check(probs)?;
        if let Some(w) = weights.iter().find(|&&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::Config(format!("class weight {w} is not positive")));
        }
        let loss = ops::weighted_cross_entropy(self.value(probs), targets, weights)?;
        self.record(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                probs,
                targets: targets.to_vec(),
                weights: weights.to_vec(),
            },
            &[probs],
            "cross-entropy",
        )
    }

    pub fn sum_squares(&mut self, x: NodeId) -> Result<NodeId> {
        self.check(x)?;
        let s = self.value(x).data().iter().map(|v| v * v).sum();
        self.record(Tensor::scalar(s), Op::SumSquares(x), &[x], "sum_squares")
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        self.check(x)?;
        let s = self.value(x).data().iter().sum();
        self.record(Tensor::scalar(s), Op::Sum(x), &[x], "sum")
    }

    /// Back-propagates from a scalar node. Gradients from any earlier call are
    /// discarded first.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::State("backward called before any forward pass".into()));
        }
        self.check(loss)?;
        if self.value(loss).len() != 1 {
            return Err(Error::State(format!(
                "backward target has shape {:?}, expected a scalar",
                self.value(loss).shape()
            )));
        }
        if self.differentiated {
            for n in &mut self.nodes {
                n.value.clear_grad();
            }
        }
        self.differentiated = true;

        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            if !self.nodes[idx].requires_grad {
                continue;
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("gradient at node {idx}")));
            }
            let contributions = self.local_backward(idx, &g)?;
            for (input, contrib) in contributions {
                if !self.nodes[input.0].requires_grad {
                    continue;
                }
                match &mut grads[input.0] {
                    Some(acc) => acc.iter_mut().zip(&contrib).for_each(|(a, c)| *a += c),
                    slot @ None => *slot = Some(contrib),
                }
            }
            self.nodes[idx].value.set_grad(g)?;
        }
        Ok(())
    }

    fn local_backward(&self, idx: usize, g: &[f64]) -> Result<Vec<(NodeId, Vec<f64>)>> {
        let node = &self.nodes[idx];
        let rg = |id: NodeId| self.nodes[id.0].requires_grad;
        let out = match &node.op {
            Op::Leaf => Vec::new(),
            Op::MatMul(a, b) => {
                let (da, db) = ops::matmul_backward(self.value(*a), self.value(*b), g);
                vec![(*a, da), (*b, db)]
            }
            Op::AddBias(x, b) => {
                let mut v = vec![(*x, g.to_vec())];
                if rg(*b) {
                    v.push((*b, ops::add_bias_backward(self.value(*b).len(), g)));
                }
                v
            }
            Op::Conv2d {
                x,
                w,
                b,
                stride,
                padding,
            } => {
                let (dx, dw, db) = ops::conv2d_backward(self.value(*x), self.value(*w), *stride, *padding, g)?;
                vec![(*x, dx), (*w, dw), (*b, db)]
            }
            Op::MaxPool { x, argmax } => {
                vec![(*x, ops::maxpool2d_backward(self.value(*x).len(), argmax, g))]
            }
            Op::GlobalAvgPool(x) => {
                vec![(*x, ops::global_avg_pool_backward(self.value(*x).shape(), g))]
            }
            Op::Reshape(x) => vec![(*x, g.to_vec())],
            Op::Relu(x) => vec![(*x, ops::relu_backward(self.value(*x), g))],
            Op::Softmax(x) => vec![(*x, ops::softmax_backward(&node.value, g))],
            Op::Concat(a, b) => {
                let (wa, wb) = (self.value(*a).shape()[1], self.value(*b).shape()[1]);
                let (da, db) = ops::concat_backward(node.value.rows(), wa, wb, g);
                vec![(*a, da), (*b, db)]
            }
            Op::CrossEntropy {
                probs,
                targets,
                weights,
            } => {
                let dp = ops::weighted_cross_entropy_backward(self.value(*probs), targets, weights, g[0]);
                vec![(*probs, dp)]
            }
            Op::SumSquares(x) => {
                let d = self.value(*x).data().iter().map(|v| 2.0 * v * g[0]).collect();
                vec![(*x, d)]
            }
            Op::Sum(x) => vec![(*x, vec![g[0]; self.value(*x).len()])],
        };
        Ok(out)
    }
}
