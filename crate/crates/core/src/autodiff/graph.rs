//! Define-by-run reverse-mode differentiation.
//!
//! A [`Graph`] records every operation as a node holding its forward value.
//! Nodes are appended in evaluation order, so walking them backwards from the
//! loss is a valid reverse topological order. Graphs are rebuilt for every
//! forward pass and never mutated in place.

use std::sync::Arc;

use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};
use crate::signal::FrameLayout;

/// Inputs to `log` and probabilities inside `log_softmax` are clamped to at
/// least this value.
pub const LOG_FLOOR: f64 = 1e-12;

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Broadcast {
    Same,
    /// rhs is a single row repeated over every lhs row.
    Row,
    Scalar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    FixedMatMul(Var, Arc<Tensor>),
    Add(Var, Var, Broadcast),
    Mul(Var, Var, Broadcast),
    AddConst(Var),
    Scale(Var, f64),
    Relu(Var),
    Log(Var),
    Exp(Var),
    Square(Var),
    Sum(Var),
    Mean(Var),
    Slice { x: Var, axis: Axis, start: usize },
    Concat { xs: Vec<Var>, axis: Axis },
    LogSoftmax(Var),
    Frame { x: Var, layout: FrameLayout, window: Arc<Vec<f64>> },
    Custom { x: Var, local_grad: Tensor },
}

struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::ShapeMismatch {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

fn broadcast_kind(op: &'static str, a: &Tensor, b: &Tensor) -> Result<Broadcast> {
    if a.shape() == b.shape() {
        return Ok(Broadcast::Same);
    }
    if b.len() == 1 && b.rank() <= 1 {
        return Ok(Broadcast::Scalar);
    }
    match (a.shape(), b.shape()) {
        ([_, c], [bc]) | ([_, c], [1, bc]) if c == bc => Ok(Broadcast::Row),
        _ => Err(mismatch(op, a, b)),
    }
}

fn zip_broadcast(a: &Tensor, b: &Tensor, kind: Broadcast, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let bd = b.data();
    let data = match kind {
        Broadcast::Same => a.data().iter().zip(bd).map(|(&x, &y)| f(x, y)).collect(),
        Broadcast::Scalar => a.data().iter().map(|&x| f(x, bd[0])).collect(),
        Broadcast::Row => {
            let c = bd.len();
            a.data().iter().enumerate().map(|(i, &x)| f(x, bd[i % c])).collect()
        }
    };
    Tensor::new(a.shape().to_vec(), data).expect("shape preserved")
}

/// Reduce a full-shape gradient back onto a broadcast operand.
fn unbroadcast(g: &Tensor, target: &Tensor, kind: Broadcast) -> Tensor {
    match kind {
        Broadcast::Same => g.clone(),
        Broadcast::Scalar => {
            Tensor::new(target.shape().to_vec(), vec![g.data().iter().sum()]).expect("scalar")
        }
        Broadcast::Row => {
            let c = target.len();
            let mut out = vec![0.0; c];
            for (i, v) in g.data().iter().enumerate() {
                out[i % c] += v;
            }
            Tensor::new(target.shape().to_vec(), out).expect("row")
        }
    }
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::new(t.shape().to_vec(), t.data().iter().map(|&v| f(v)).collect()).expect("shape preserved")
}

fn row_logsumexp(row: &[f64]) -> f64 {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
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

    fn push(&mut self, op_name: &'static str, value: Tensor, op: Op) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: op_name });
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn leaf(&mut self, t: Tensor) -> Result<Var> {
        self.push("leaf", t, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let out = matmul_values("matmul", ta, tb)?;
        self.push("matmul", out, Op::MatMul(a, b))
    }

    /// Multiply by a constant matrix that is not part of the graph.
    pub fn fixed_matmul(&mut self, x: Var, m: Arc<Tensor>) -> Result<Var> {
        let out = matmul_values("fixed_matmul", self.value(x), &m)?;
        self.push("fixed_matmul", out, Op::FixedMatMul(x, m))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let kind = broadcast_kind("add", ta, tb)?;
        let out = zip_broadcast(ta, tb, kind, |x, y| x + y);
        self.push("add", out, Op::Add(a, b, kind))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let kind = broadcast_kind("mul", ta, tb)?;
        let out = zip_broadcast(ta, tb, kind, |x, y| x * y);
        self.push("mul", out, Op::Mul(a, b, kind))
    }

    pub fn add_const(&mut self, x: Var, c: f64) -> Result<Var> {
        let out = map(self.value(x), |v| v + c);
        self.push("add_const", out, Op::AddConst(x))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        let out = map(self.value(x), |v| v * c);
        self.push("scale", out, Op::Scale(x, c))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let out = map(self.value(x), |v| v.max(0.0));
        self.push("relu", out, Op::Relu(x))
    }

    /// Natural log with inputs clamped below at [`LOG_FLOOR`].
    pub fn log(&mut self, x: Var) -> Result<Var> {
        let out = map(self.value(x), |v| v.max(LOG_FLOOR).ln());
        self.push("log", out, Op::Log(x))
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        let out = map(self.value(x), f64::exp);
        self.push("exp", out, Op::Exp(x))
    }

    pub fn square(&mut self, x: Var) -> Result<Var> {
        let out = map(self.value(x), |v| v * v);
        self.push("square", out, Op::Square(x))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).data().iter().sum();
        self.push("sum", Tensor::scalar(s), Op::Sum(x))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        self.push("mean", Tensor::scalar(s), Op::Mean(x))
    }

    /// `len` rows or columns of a matrix starting at `start`.
    pub fn slice(&mut self, x: Var, axis: Axis, start: usize, len: usize) -> Result<Var> {
        let t = self.value(x);
        let (r, c) = t.dims2().filter(|_| t.rank() == 2).ok_or_else(|| Error::ShapeMismatch {
            op: "slice",
            lhs: t.shape().to_vec(),
            rhs: vec![start, len],
        })?;
        let extent = match axis {
            Axis::Rows => r,
            Axis::Cols => c,
        };
        if start + len > extent {
            return Err(Error::ShapeMismatch {
                op: "slice",
                lhs: t.shape().to_vec(),
                rhs: vec![start, len],
            });
        }
        let out = match axis {
            Axis::Rows => Tensor::matrix(len, c, t.data()[start * c..(start + len) * c].to_vec())?,
            Axis::Cols => {
                let mut d = Vec::with_capacity(r * len);
                for i in 0..r {
                    d.extend_from_slice(&t.data()[i * c + start..i * c + start + len]);
                }
                Tensor::matrix(r, len, d)?
            }
        };
        self.push("slice", out, Op::Slice { x, axis, start })
    }

    pub fn concat(&mut self, xs: &[Var], axis: Axis) -> Result<Var> {
        let first = xs
            .first()
            .ok_or_else(|| crate::error::invalid("concat of zero tensors"))?;
        let t0 = self.value(*first);
        let (r0, c0) = t0.dims2().filter(|_| t0.rank() == 2).ok_or_else(|| Error::ShapeMismatch {
            op: "concat",
            lhs: t0.shape().to_vec(),
            rhs: vec![],
        })?;
        let mut dims = Vec::with_capacity(xs.len());
        for &v in xs {
            let t = self.value(v);
            let ok = t.rank() == 2
                && match axis {
                    Axis::Rows => t.shape()[1] == c0,
                    Axis::Cols => t.shape()[0] == r0,
                };
            if !ok {
                return Err(mismatch("concat", t0, t));
            }
            dims.push((t.shape()[0], t.shape()[1]));
        }
        let out = match axis {
            Axis::Rows => {
                let rows = dims.iter().map(|d| d.0).sum();
                let mut d = Vec::with_capacity(rows * c0);
                for &v in xs {
                    d.extend_from_slice(self.value(v).data());
                }
                Tensor::matrix(rows, c0, d)?
            }
            Axis::Cols => {
                let cols: usize = dims.iter().map(|d| d.1).sum();
                let mut d = Vec::with_capacity(r0 * cols);
                for i in 0..r0 {
                    for &v in xs {
                        d.extend_from_slice(self.value(v).row(i));
                    }
                }
                Tensor::matrix(r0, cols, d)?
            }
        };
        self.push("concat", out, Op::Concat { xs: xs.to_vec(), axis })
    }

    /// Row-wise log-softmax. Outputs are floored at `ln(LOG_FLOOR)`; floored
    /// entries pass no gradient.
    pub fn log_softmax(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let (r, c) = t.dims2().ok_or_else(|| mismatch("log_softmax", t, t))?;
        let floor = LOG_FLOOR.ln();
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let row = &t.data()[i * c..(i + 1) * c];
            let lse = row_logsumexp(row);
            for j in 0..c {
                out[i * c + j] = (row[j] - lse).max(floor);
            }
        }
        let out = Tensor::new(t.shape().to_vec(), out)?;
        self.push("log_softmax", out, Op::LogSoftmax(x))
    }

    /// Slice a sample vector into windowed frames (`frames x width`).
    pub fn frame(&mut self, x: Var, layout: FrameLayout, window: Arc<Vec<f64>>) -> Result<Var> {
        let t = self.value(x);
        if t.len() != layout.source_len || window.len() != layout.width {
            return Err(Error::ShapeMismatch {
                op: "frame",
                lhs: t.shape().to_vec(),
                rhs: vec![layout.source_len, layout.width],
            });
        }
        let out = Tensor::matrix(layout.frames, layout.width, layout.extract(t.data(), &window))?;
        self.push("frame", out, Op::Frame { x, layout, window })
    }

    /// Scalar node whose value and gradient with respect to `x` were computed
    /// outside the graph.
    pub fn custom_scalar(&mut self, x: Var, value: f64, local_grad: Tensor) -> Result<Var> {
        let t = self.value(x);
        if t.shape() != local_grad.shape() {
            return Err(mismatch("custom_scalar", t, &local_grad));
        }
        if !local_grad.is_finite() {
            return Err(Error::NonFinite { op: "custom_scalar" });
        }
        self.push("custom_scalar", Tensor::scalar(value), Op::Custom { x, local_grad })
    }

    /// Propagate adjoints from a scalar `loss` to every node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lt = self.value(loss);
        if lt.len() != 1 {
            return Err(crate::error::invalid(format!(
                "backward needs a scalar loss, got shape {:?}",
                lt.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::new(lt.shape().to_vec(), vec![1.0])?);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (m, k) = ta.dims2().expect("checked");
                    let n = tb.dims2().expect("checked").1;
                    let mut ga = vec![0.0; m * k];
                    gemm(m, n, k, 1.0, g.data(), false, tb.data(), true, 0.0, &mut ga);
                    let mut gb = vec![0.0; k * n];
                    gemm(k, m, n, 1.0, ta.data(), true, g.data(), false, 0.0, &mut gb);
                    accumulate(&mut grads, *a, Tensor::new(ta.shape().to_vec(), ga)?);
                    accumulate(&mut grads, *b, Tensor::new(tb.shape().to_vec(), gb)?);
                }
                Op::FixedMatMul(x, mat) => {
                    let tx = self.value(*x);
                    let (m, k) = tx.dims2().expect("checked");
                    let n = mat.dims2().expect("checked").1;
                    let mut gx = vec![0.0; m * k];
                    gemm(m, n, k, 1.0, g.data(), false, mat.data(), true, 0.0, &mut gx);
                    accumulate(&mut grads, *x, Tensor::new(tx.shape().to_vec(), gx)?);
                }
                Op::Add(a, b, kind) => {
                    accumulate(&mut grads, *b, unbroadcast(&g, self.value(*b), *kind));
                    accumulate(&mut grads, *a, g.clone());
                }
                Op::Mul(a, b, kind) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let ga = zip_broadcast(&g, tb, *kind, |gv, y| gv * y);
                    let gfull = Tensor::new(
                        g.shape().to_vec(),
                        g.data().iter().zip(ta.data()).map(|(gv, x)| gv * x).collect(),
                    )?;
                    accumulate(&mut grads, *b, unbroadcast(&gfull, tb, *kind));
                    accumulate(&mut grads, *a, ga);
                }
                Op::AddConst(x) => accumulate(&mut grads, *x, g.clone()),
                Op::Scale(x, c) => accumulate(&mut grads, *x, map(&g, |v| v * c)),
                Op::Relu(x) => {
                    let tx = self.value(*x);
                    let d = g.data().iter().zip(tx.data()).map(|(gv, v)| if *v > 0.0 { *gv } else { 0.0 });
                    accumulate(&mut grads, *x, Tensor::new(tx.shape().to_vec(), d.collect())?);
                }
                Op::Log(x) => {
                    let tx = self.value(*x);
                    let d = g
                        .data()
                        .iter()
                        .zip(tx.data())
                        .map(|(gv, v)| if *v >= LOG_FLOOR { gv / v } else { 0.0 });
                    accumulate(&mut grads, *x, Tensor::new(tx.shape().to_vec(), d.collect())?);
                }
                Op::Exp(x) => {
                    let d = g.data().iter().zip(node.value.data()).map(|(gv, y)| gv * y);
                    accumulate(&mut grads, *x, Tensor::new(g.shape().to_vec(), d.collect())?);
                }
                Op::Square(x) => {
                    let tx = self.value(*x);
                    let d = g.data().iter().zip(tx.data()).map(|(gv, v)| 2.0 * v * gv);
                    accumulate(&mut grads, *x, Tensor::new(tx.shape().to_vec(), d.collect())?);
                }
                Op::Sum(x) => {
                    let tx = self.value(*x);
                    accumulate(&mut grads, *x, Tensor::filled(tx.shape(), g.item()));
                }
                Op::Mean(x) => {
                    let tx = self.value(*x);
                    accumulate(&mut grads, *x, Tensor::filled(tx.shape(), g.item() / tx.len() as f64));
                }
                Op::Slice { x, axis, start } => {
                    let tx = self.value(*x);
                    let (r, c) = tx.dims2().expect("checked");
                    let mut gx = vec![0.0; r * c];
                    let (gr, gc) = g.dims2().expect("matrix");
                    for i in 0..gr {
                        for j in 0..gc {
                            let (si, sj) = match axis {
                                Axis::Rows => (start + i, j),
                                Axis::Cols => (i, start + j),
                            };
                            gx[si * c + sj] = g.data()[i * gc + j];
                        }
                    }
                    accumulate(&mut grads, *x, Tensor::new(tx.shape().to_vec(), gx)?);
                }
                Op::Concat { xs, axis } => {
                    let (_, gc) = g.dims2().expect("matrix");
                    let mut offset = 0;
                    for &v in xs {
                        let tv = self.value(v);
                        let (r, c) = (tv.shape()[0], tv.shape()[1]);
                        let part = match axis {
                            Axis::Rows => g.data()[offset * gc..(offset + r) * gc].to_vec(),
                            Axis::Cols => {
                                let mut d = Vec::with_capacity(r * c);
                                for i in 0..r {
                                    d.extend_from_slice(&g.data()[i * gc + offset..i * gc + offset + c]);
                                }
                                d
                            }
                        };
                        offset += match axis {
                            Axis::Rows => r,
                            Axis::Cols => c,
                        };
                        accumulate(&mut grads, v, Tensor::new(tv.shape().to_vec(), part)?);
                    }
                }
                Op::LogSoftmax(x) => {
                    let tx = self.value(*x);
                    let (r, c) = tx.dims2().expect("checked");
                    let floor = LOG_FLOOR.ln();
                    let mut gx = vec![0.0; r * c];
                    for i in 0..r {
                        let xr = &tx.data()[i * c..(i + 1) * c];
                        let yr = &node.value.data()[i * c..(i + 1) * c];
                        let gr = &g.data()[i * c..(i + 1) * c];
                        let lse = row_logsumexp(xr);
                        let live = |j: usize| if yr[j] > floor { gr[j] } else { 0.0 };
                        let total: f64 = (0..c).map(live).sum();
                        for j in 0..c {
                            gx[i * c + j] = live(j) - (xr[j] - lse).exp() * total;
                        }
                    }
                    accumulate(&mut grads, *x, Tensor::new(tx.shape().to_vec(), gx)?);
                }
                Op::Frame { x, layout, window } => {
                    let tx = self.value(*x);
                    let gx = layout.synthesize(g.data(), window);
                    accumulate(&mut grads, *x, Tensor::new(tx.shape().to_vec(), gx)?);
                }
                Op::Custom { x, local_grad } => {
                    let s = g.item();
                    accumulate(&mut grads, *x, map(local_grad, |v| v * s));
                }
            }
            grads[i] = Some(g);
        }

        for (i, node) in self.nodes.iter().enumerate() {
            if grads[i].is_none() && matches!(node.op, Op::Leaf) {
                grads[i] = Some(Tensor::zeros(node.value.shape()));
            }
        }
        Ok(Gradients { grads })
    }
}

fn matmul_values(op: &'static str, a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let ((m, k), (k2, n)) = match (a.dims2(), b.dims2()) {
        (Some(x), Some(y)) if b.rank() == 2 => (x, y),
        _ => return Err(mismatch(op, a, b)),
    };
    if k != k2 {
        return Err(mismatch(op, a, b));
    }
    let mut out = vec![0.0; m * n];
    gemm(m, k, n, 1.0, a.data(), false, b.data(), false, 0.0, &mut out);
    Tensor::matrix(m, n, out)
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (e, x) in existing.data_mut().iter_mut().zip(g.data()) {
                *e += x;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

/// Adjoints from one backward pass. Leaves off every path to the loss hold
/// zeros.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of a leaf. Panics for interior nodes that never received an
    /// adjoint.
    pub fn wrt(&self, v: Var) -> &Tensor {
        self.get(v).expect("no gradient recorded for node")
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}
