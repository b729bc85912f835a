//! Per-forward-pass operation tape.
//!
//! A `Tape` owns every intermediate tensor of one forward computation. Ops
//! record their inputs by index; `backward` replays the records in exact
//! reverse order, accumulating vector-Jacobian products into per-node
//! gradient slots. A tensor consumed k times therefore receives the sum of k
//! partial contributions. The tape is built, differentiated once and dropped;
//! nothing persists across forward passes.

use super::tensor::{matmul, matmul_accum, transpose, Tensor};
use super::{leaky_relu, sigmoid, softplus, LEAKY_SLOPE};
use crate::error::{Error, Result};

/// Handle to a tensor recorded on a tape. Only meaningful for the tape that
/// issued it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Matmul { a: Var, b: Var, m: usize, k: usize, n: usize },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Hadamard { a: Var, b: Var },
    Scale { x: Var, factor: f64 },
    Tanh { x: Var },
    Sigmoid { x: Var },
    LeakyRelu { x: Var },
    Softplus { x: Var },
    ReduceSum { x: Var },
}

struct Node {
    op: Op,
    value: Tensor,
    /// True when the node is a grad leaf or depends on one. Backward skips
    /// everything else.
    needs_grad: bool,
}

pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: Tensor, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Record a leaf. Gradient participation follows `t.requires_grad()`.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        let needs = t.requires_grad();
        self.push(Op::Leaf, t, needs)
    }

    /// Record a parameter leaf (snapshot; always differentiable).
    pub fn param(&mut self, t: &Tensor) -> Var {
        self.push(Op::Leaf, t.clone().with_grad(), true)
    }

    /// Record a constant leaf (never differentiated).
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf, t, false)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn binary_shapes(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::Dimension {
                op,
                left: sa.to_vec(),
                right: sb.to_vec(),
            });
        }
        Ok(())
    }

    /// a(m x k) . b(k x n) -> (m x n).
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, ka) = self.value(a).dims2("matmul")?;
        let (kb, n) = self.value(b).dims2("matmul")?;
        if ka != kb {
            return Err(Error::Dimension {
                op: "matmul",
                left: self.value(a).shape().to_vec(),
                right: self.value(b).shape().to_vec(),
            });
        }
        let data = matmul(self.value(a).data(), self.value(b).data(), m, ka, n);
        let value = Tensor::from_vec(vec![m, n], data)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Op::Matmul { a, b, m, k: ka, n }, value, needs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_shapes("add", a, b)?;
        let data: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let value = Tensor::from_vec(self.value(a).shape().to_vec(), data)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Op::Add { a, b }, value, needs))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_shapes("sub", a, b)?;
        let data: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x - y)
            .collect();
        let value = Tensor::from_vec(self.value(a).shape().to_vec(), data)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Op::Sub { a, b }, value, needs))
    }

    /// Elementwise product.
    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_shapes("hadamard", a, b)?;
        let data: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let value = Tensor::from_vec(self.value(a).shape().to_vec(), data)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Op::Hadamard { a, b }, value, needs))
    }

    /// Scalar constant times tensor.
    pub fn scale(&mut self, factor: f64, x: Var) -> Var {
        let data: Vec<f64> = self.value(x).data().iter().map(|v| factor * v).collect();
        let value = Tensor::from_vec(self.value(x).shape().to_vec(), data).expect("same shape");
        let needs = self.needs(x);
        self.push(Op::Scale { x, factor }, value, needs)
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let data: Vec<f64> = self.value(x).data().iter().map(|&v| f(v)).collect();
        let value = Tensor::from_vec(self.value(x).shape().to_vec(), data).expect("same shape");
        let needs = self.needs(x);
        self.push(op, value, needs)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, f64::tanh, Op::Tanh { x })
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, sigmoid, Op::Sigmoid { x })
    }

    /// max(0.01 x, x).
    pub fn leaky_relu(&mut self, x: Var) -> Var {
        self.unary(x, |v| leaky_relu(v, LEAKY_SLOPE), Op::LeakyRelu { x })
    }

    /// ln(1 + e^x). `softplus(-z)` is the stable form of `-ln sigmoid(z)`.
    pub fn softplus(&mut self, x: Var) -> Var {
        self.unary(x, softplus, Op::Softplus { x })
    }

    /// Sum of all elements as a 1x1 scalar. The empty sum is 0.
    pub fn reduce_sum(&mut self, x: Var) -> Var {
        let total: f64 = self.value(x).data().iter().sum();
        let needs = self.needs(x);
        self.push(Op::ReduceSum { x }, Tensor::scalar(total), needs)
    }

    /// Reverse sweep from a scalar loss. Returns per-node gradients; nodes the
    /// loss does not reach have no entry, which readers treat as exact zero.
    pub fn backward(&self, loss: Var) -> Result<Grads> {
        if self.value(loss).numel() != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            if grads[idx].is_none() || !self.nodes[idx].needs_grad {
                continue;
            }
            // Take the slot to sidestep aliasing with accumulation below.
            let upstream = grads[idx].take().expect("checked above");
            self.backward_op(idx, &upstream, &mut grads);
            grads[idx] = Some(upstream);
        }
        Ok(Grads { grads })
    }

    fn backward_op(&self, idx: usize, upstream: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let accumulate = |grads: &mut [Option<Vec<f64>>], v: Var, contribution: Vec<f64>| {
            match &mut grads[v.0] {
                Some(existing) => {
                    for (e, c) in existing.iter_mut().zip(contribution) {
                        *e += c;
                    }
                }
                slot @ None => *slot = Some(contribution),
            }
        };

        match self.nodes[idx].op {
            Op::Leaf => {}
            Op::Matmul { a, b, m, k, n } => {
                if self.needs(a) {
                    // dA = dC . B^T
                    let bt = transpose(self.value(b).data(), k, n);
                    let mut da = vec![0.0; m * k];
                    matmul_accum(upstream, &bt, m, n, k, &mut da);
                    accumulate(grads, a, da);
                }
                if self.needs(b) {
                    // dB = A^T . dC
                    let at = transpose(self.value(a).data(), m, k);
                    let mut db = vec![0.0; k * n];
                    matmul_accum(&at, upstream, k, m, n, &mut db);
                    accumulate(grads, b, db);
                }
            }
            Op::Add { a, b } => {
                if self.needs(a) {
                    accumulate(grads, a, upstream.to_vec());
                }
                if self.needs(b) {
                    accumulate(grads, b, upstream.to_vec());
                }
            }
            Op::Sub { a, b } => {
                if self.needs(a) {
                    accumulate(grads, a, upstream.to_vec());
                }
                if self.needs(b) {
                    accumulate(grads, b, upstream.iter().map(|g| -g).collect());
                }
            }
            Op::Hadamard { a, b } => {
                if self.needs(a) {
                    let da = upstream
                        .iter()
                        .zip(self.value(b).data())
                        .map(|(g, y)| g * y)
                        .collect();
                    accumulate(grads, a, da);
                }
                if self.needs(b) {
                    let db = upstream
                        .iter()
                        .zip(self.value(a).data())
                        .map(|(g, x)| g * x)
                        .collect();
                    accumulate(grads, b, db);
                }
            }
            Op::Scale { x, factor } => {
                if self.needs(x) {
                    accumulate(grads, x, upstream.iter().map(|g| factor * g).collect());
                }
            }
            Op::Tanh { x } => {
                if self.needs(x) {
                    let dx = upstream
                        .iter()
                        .zip(self.nodes[idx].value.data())
                        .map(|(g, y)| g * (1.0 - y * y))
                        .collect();
                    accumulate(grads, x, dx);
                }
            }
            Op::Sigmoid { x } => {
                if self.needs(x) {
                    let dx = upstream
                        .iter()
                        .zip(self.nodes[idx].value.data())
                        .map(|(g, y)| g * y * (1.0 - y))
                        .collect();
                    accumulate(grads, x, dx);
                }
            }
            Op::LeakyRelu { x } => {
                if self.needs(x) {
                    let dx = upstream
                        .iter()
                        .zip(self.value(x).data())
                        .map(|(g, &v)| g * if v > 0.0 { 1.0 } else { LEAKY_SLOPE })
                        .collect();
                    accumulate(grads, x, dx);
                }
            }
            Op::Softplus { x } => {
                if self.needs(x) {
                    let dx = upstream
                        .iter()
                        .zip(self.value(x).data())
                        .map(|(g, &v)| g * sigmoid(v))
                        .collect();
                    accumulate(grads, x, dx);
                }
            }
            Op::ReduceSum { x } => {
                if self.needs(x) {
                    let n = self.value(x).numel();
                    accumulate(grads, x, vec![upstream[0]; n]);
                }
            }
        }
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Result of a backward sweep, indexed by `Var`.
pub struct Grads {
    grads: Vec<Option<Vec<f64>>>,
}

impl Grads {
    /// Gradient w.r.t. `v`, or `None` if the loss does not reach it (zero).
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.index()].as_deref()
    }

    /// Gradient w.r.t. `v`, materializing zeros for unreached nodes.
    pub fn dense(&self, v: Var, numel: usize) -> Vec<f64> {
        match self.get(v) {
            Some(g) => g.to_vec(),
            None => vec![0.0; numel],
        }
    }
}
