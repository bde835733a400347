//! Recorded computation tape with reverse-mode differentiation.
//!
//! Every operation on a [`Var`] appends one node holding its forward value.
//! [`Var::backward`] walks the tape in reverse append order exactly once,
//! accumulating gradients additively across fan-out.

use std::cell::RefCell;
use std::rc::Rc;

use rand::Rng;

use super::matrix::dot;
use super::{Tensor, TensorError};

/// What to do with a softmax row whose entries are all masked out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmptyRows {
    Error,
    Zero,
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    AddRow(usize, usize),
    MulCol(usize, Rc<Vec<f64>>),
    Scale(usize, f64),
    Tanh(usize),
    Relu(usize),
    Sigmoid(usize),
    Transpose(usize),
    SliceCols(usize, usize),
    ConcatCols(Vec<usize>),
    ConcatRows(Vec<usize>),
    GatherRows(usize, Rc<Vec<usize>>),
    Softmax { input: usize, scale: f64 },
    LayerNorm { x: usize, gain: usize, bias: usize, xhat: Tensor, inv_std: Vec<f64> },
    PairDot(usize, usize),
    PairWeightedSum(usize, usize),
    RowDot(usize, usize),
    Sum(usize),
    SigmoidBce { logits: usize, labels: Rc<Vec<f64>>, pos_weight: f64 },
}

struct Node {
    value: Rc<Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Append-only record of a forward pass. Single-threaded by construction.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to one value on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}{:?}", self.id, self.shape())
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    /// Smallest `|x|` over the inputs of every recorded ReLU, or `None` if
    /// the tape has none. Finite differences with a step below this margin
    /// never cross a kink.
    pub fn relu_margin(&self) -> Option<f64> {
        let nodes = self.nodes.borrow();
        nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Relu(input) => Some(nodes[input].value.data().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))),
                _ => None,
            })
            .reduce(f64::min)
    }

    /// A differentiable leaf.
    pub fn param(&self, value: Tensor) -> Var<'_> {
        self.leaf(value, true)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.leaf(value, false)
    }

    fn leaf(&self, value: Tensor, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            op: Op::Leaf,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn value(&self, id: usize) -> Rc<Tensor> {
        self.nodes.borrow()[id].value.clone()
    }

    fn push(&self, name: &'static str, value: Tensor, op: Op, inputs: &[usize]) -> Result<Var<'_>, TensorError> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op: name });
        }
        let mut nodes = self.nodes.borrow_mut();
        let requires_grad = inputs.iter().any(|&i| nodes[i].requires_grad);
        nodes.push(Node {
            value: Rc::new(value),
            op,
            requires_grad,
        });
        Ok(Var {
            tape: self,
            id: nodes.len() - 1,
        })
    }

    /// Gradients of the scalar `loss` with respect to every node.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients, TensorError> {
        if !std::ptr::eq(self, loss.tape) {
            return Err(TensorError::DetachedLoss);
        }
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.id];
        if root.value.shape() != (1, 1) {
            return Err(TensorError::NonScalarLoss(root.value.shape()));
        }
        if !root.requires_grad {
            return Err(TensorError::DetachedLoss);
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.id + 1];
        grads[loss.id] = Some(Tensor::scalar(1.0));
        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            if !nodes[id].requires_grad {
                continue;
            }
            backprop(&nodes, id, &g, &mut grads);
            grads[id] = Some(g);
        }
        // leaves that were never reached still get an explicit zero
        for (id, node) in nodes.iter().enumerate().take(loss.id + 1) {
            if node.requires_grad && matches!(node.op, Op::Leaf) && grads[id].is_none() {
                let (r, c) = node.value.shape();
                grads[id] = Some(Tensor::zeros(r, c));
            }
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], id: usize, g: Tensor) {
    match &mut grads[id] {
        Some(existing) => existing.add_assign(&g),
        slot => *slot = Some(g),
    }
}

fn backprop(nodes: &[Node], id: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
    let needs = |i: usize| nodes[i].requires_grad;
    let val = |i: usize| &*nodes[i].value;
    let out = &*nodes[id].value;
    match &nodes[id].op {
        Op::Leaf => {}
        &Op::MatMul(a, b) => {
            if needs(a) {
                accumulate(grads, a, g.matmul_t(val(b)));
            }
            if needs(b) {
                accumulate(grads, b, val(a).t_matmul(g));
            }
        }
        &Op::Add(a, b) => {
            if needs(a) {
                accumulate(grads, a, g.clone());
            }
            if needs(b) {
                accumulate(grads, b, g.clone());
            }
        }
        &Op::Sub(a, b) => {
            if needs(a) {
                accumulate(grads, a, g.clone());
            }
            if needs(b) {
                accumulate(grads, b, g.map(|v| -v));
            }
        }
        &Op::Mul(a, b) => {
            if needs(a) {
                accumulate(grads, a, g.zip_map(val(b), |x, y| x * y));
            }
            if needs(b) {
                accumulate(grads, b, g.zip_map(val(a), |x, y| x * y));
            }
        }
        &Op::AddRow(a, row) => {
            if needs(a) {
                accumulate(grads, a, g.clone());
            }
            if needs(row) {
                let mut acc = Tensor::zeros(1, g.cols());
                for r in 0..g.rows() {
                    for (o, v) in acc.data_mut().iter_mut().zip(g.row(r)) {
                        *o += v;
                    }
                }
                accumulate(grads, row, acc);
            }
        }
        Op::MulCol(a, col) => {
            if needs(*a) {
                let mut d = g.clone();
                for (r, s) in col.iter().enumerate() {
                    d.row_mut(r).iter_mut().for_each(|v| *v *= s);
                }
                accumulate(grads, *a, d);
            }
        }
        &Op::Scale(a, s) => accumulate(grads, a, g.map(|v| v * s)),
        &Op::Tanh(a) => accumulate(grads, a, g.zip_map(out, |gv, y| gv * (1.0 - y * y))),
        &Op::Relu(a) => accumulate(grads, a, g.zip_map(val(a), |gv, x| if x > 0.0 { gv } else { 0.0 })),
        &Op::Sigmoid(a) => accumulate(grads, a, g.zip_map(out, |gv, y| gv * y * (1.0 - y))),
        &Op::Transpose(a) => accumulate(grads, a, g.transpose()),
        &Op::SliceCols(a, start) => {
            let src = val(a);
            let mut d = Tensor::zeros(src.rows(), src.cols());
            for r in 0..g.rows() {
                d.row_mut(r)[start..start + g.cols()].copy_from_slice(g.row(r));
            }
            accumulate(grads, a, d);
        }
        Op::ConcatCols(parts) => {
            let mut offset = 0;
            for &p in parts {
                let w = val(p).cols();
                if needs(p) {
                    let mut d = Tensor::zeros(g.rows(), w);
                    for r in 0..g.rows() {
                        d.row_mut(r).copy_from_slice(&g.row(r)[offset..offset + w]);
                    }
                    accumulate(grads, p, d);
                }
                offset += w;
            }
        }
        Op::ConcatRows(parts) => {
            let mut offset = 0;
            for &p in parts {
                let h = val(p).rows();
                if needs(p) {
                    let slice = g.data()[offset * g.cols()..(offset + h) * g.cols()].to_vec();
                    accumulate(grads, p, Tensor::from_vec(h, g.cols(), slice).expect("row split"));
                }
                offset += h;
            }
        }
        Op::GatherRows(a, idx) => {
            let src = val(*a);
            let mut d = Tensor::zeros(src.rows(), src.cols());
            for (r, &i) in idx.iter().enumerate() {
                for (o, v) in d.row_mut(i).iter_mut().zip(g.row(r)) {
                    *o += v;
                }
            }
            accumulate(grads, *a, d);
        }
        &Op::Softmax { input, scale } => {
            let mut d = Tensor::zeros(out.rows(), out.cols());
            for r in 0..out.rows() {
                let y = out.row(r);
                let gr = g.row(r);
                let inner = dot(y, gr);
                for ((o, &yv), &gv) in d.row_mut(r).iter_mut().zip(y).zip(gr) {
                    *o = yv * (gv - inner) / scale;
                }
            }
            accumulate(grads, input, d);
        }
        Op::LayerNorm {
            x,
            gain,
            bias,
            xhat,
            inv_std,
        } => {
            let gain_v = val(*gain);
            let cols = g.cols();
            if needs(*gain) {
                let mut dg = Tensor::zeros(1, cols);
                for r in 0..g.rows() {
                    for ((o, gv), xv) in dg.data_mut().iter_mut().zip(g.row(r)).zip(xhat.row(r)) {
                        *o += gv * xv;
                    }
                }
                accumulate(grads, *gain, dg);
            }
            if needs(*bias) {
                let mut db = Tensor::zeros(1, cols);
                for r in 0..g.rows() {
                    for (o, gv) in db.data_mut().iter_mut().zip(g.row(r)) {
                        *o += gv;
                    }
                }
                accumulate(grads, *bias, db);
            }
            if needs(*x) {
                let n = cols as f64;
                let mut dx = Tensor::zeros(g.rows(), cols);
                for r in 0..g.rows() {
                    let dxhat: Vec<f64> = g.row(r).iter().zip(gain_v.data()).map(|(a, b)| a * b).collect();
                    let sum_d: f64 = dxhat.iter().sum();
                    let sum_dx: f64 = dot(&dxhat, xhat.row(r));
                    let inv = inv_std[r];
                    for ((o, dh), xh) in dx.row_mut(r).iter_mut().zip(&dxhat).zip(xhat.row(r)) {
                        *o = inv / n * (n * dh - sum_d - xh * sum_dx);
                    }
                }
                accumulate(grads, *x, dx);
            }
        }
        &Op::PairDot(q, pairs) => {
            let qv = val(q);
            let pv = val(pairs);
            let m = g.cols();
            if needs(q) {
                let mut dq = Tensor::zeros(qv.rows(), qv.cols());
                for i in 0..qv.rows() {
                    for j in 0..m {
                        let w = g.get(i, j);
                        for (o, p) in dq.row_mut(i).iter_mut().zip(pv.row(i * m + j)) {
                            *o += w * p;
                        }
                    }
                }
                accumulate(grads, q, dq);
            }
            if needs(pairs) {
                let mut dp = Tensor::zeros(pv.rows(), pv.cols());
                for i in 0..qv.rows() {
                    for j in 0..m {
                        let w = g.get(i, j);
                        for (o, qq) in dp.row_mut(i * m + j).iter_mut().zip(qv.row(i)) {
                            *o = w * qq;
                        }
                    }
                }
                accumulate(grads, pairs, dp);
            }
        }
        &Op::PairWeightedSum(alpha, pairs) => {
            let av = val(alpha);
            let pv = val(pairs);
            let m = av.cols();
            if needs(alpha) {
                let mut da = Tensor::zeros(av.rows(), m);
                for i in 0..av.rows() {
                    for j in 0..m {
                        da.set(i, j, dot(g.row(i), pv.row(i * m + j)));
                    }
                }
                accumulate(grads, alpha, da);
            }
            if needs(pairs) {
                let mut dp = Tensor::zeros(pv.rows(), pv.cols());
                for i in 0..av.rows() {
                    for j in 0..m {
                        let w = av.get(i, j);
                        for (o, gv) in dp.row_mut(i * m + j).iter_mut().zip(g.row(i)) {
                            *o = w * gv;
                        }
                    }
                }
                accumulate(grads, pairs, dp);
            }
        }
        &Op::RowDot(a, b) => {
            let (av, bv) = (val(a), val(b));
            if needs(a) {
                let mut d = bv.clone();
                for r in 0..d.rows() {
                    let s = g.get(r, 0);
                    d.row_mut(r).iter_mut().for_each(|v| *v *= s);
                }
                accumulate(grads, a, d);
            }
            if needs(b) {
                let mut d = av.clone();
                for r in 0..d.rows() {
                    let s = g.get(r, 0);
                    d.row_mut(r).iter_mut().for_each(|v| *v *= s);
                }
                accumulate(grads, b, d);
            }
        }
        &Op::Sum(a) => {
            let (r, c) = val(a).shape();
            accumulate(grads, a, Tensor::filled(r, c, g.item()));
        }
        Op::SigmoidBce {
            logits,
            labels,
            pos_weight,
        } => {
            let z = val(*logits);
            let s = g.item();
            let data = z
                .data()
                .iter()
                .zip(labels.iter())
                .map(|(&zv, &y)| {
                    let p = sigmoid(zv);
                    s * (pos_weight * y * (p - 1.0) + (1.0 - y) * p)
                })
                .collect();
            accumulate(grads, *logits, Tensor::from_vec(z.rows(), z.cols(), data).expect("bce grad"));
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Gradients of one backward pass, indexed by tape node.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var<'_>) -> Option<&Tensor> {
        self.grads.get(var.id).and_then(|g| g.as_ref())
    }
}

fn shape_err(op: &'static str, left: (usize, usize), right: (usize, usize)) -> TensorError {
    TensorError::ShapeMismatch { op, left, right }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Rc<Tensor> {
        self.tape.value(self.id)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.tape.nodes.borrow()[self.id].value.shape()
    }

    pub fn rows(&self) -> usize {
        self.shape().0
    }

    pub fn cols(&self) -> usize {
        self.shape().1
    }

    pub fn backward(&self) -> Result<Gradients, TensorError> {
        self.tape.backward(*self)
    }

    fn same_tape(&self, other: &Var<'t>) -> Result<(), TensorError> {
        if std::ptr::eq(self.tape, other.tape) {
            Ok(())
        } else {
            Err(TensorError::DetachedLoss)
        }
    }

    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        self.same_tape(&other)?;
        let v = self.value().matmul(&other.value())?;
        self.tape.push("matmul", v, Op::MatMul(self.id, other.id), &[self.id, other.id])
    }

    fn elementwise(
        self,
        other: Var<'t>,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var<'t>, TensorError> {
        self.same_tape(&other)?;
        let (a, b) = (self.value(), other.value());
        if a.shape() != b.shape() {
            return Err(shape_err(name, a.shape(), b.shape()));
        }
        self.tape.push(name, a.zip_map(&b, f), op, &[self.id, other.id])
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        self.elementwise(other, "add", |a, b| a + b, Op::Add(self.id, other.id))
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        self.elementwise(other, "sub", |a, b| a - b, Op::Sub(self.id, other.id))
    }

    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        self.elementwise(other, "mul", |a, b| a * b, Op::Mul(self.id, other.id))
    }

    /// Adds a `1×cols` row to every row.
    pub fn add_row(self, row: Var<'t>) -> Result<Var<'t>, TensorError> {
        self.same_tape(&row)?;
        let (a, r) = (self.value(), row.value());
        if r.rows() != 1 || r.cols() != a.cols() {
            return Err(shape_err("add_row", a.shape(), r.shape()));
        }
        let mut v = (*a).clone();
        for i in 0..v.rows() {
            for (o, b) in v.row_mut(i).iter_mut().zip(r.data()) {
                *o += b;
            }
        }
        self.tape.push("add_row", v, Op::AddRow(self.id, row.id), &[self.id, row.id])
    }

    /// Multiplies row `i` by the constant `scales[i]`.
    pub fn mul_rows_const(self, scales: Vec<f64>) -> Result<Var<'t>, TensorError> {
        let a = self.value();
        if scales.len() != a.rows() {
            return Err(shape_err("mul_rows_const", a.shape(), (scales.len(), 1)));
        }
        let mut v = (*a).clone();
        for (i, s) in scales.iter().enumerate() {
            v.row_mut(i).iter_mut().for_each(|x| *x *= s);
        }
        self.tape
            .push("mul_rows_const", v, Op::MulCol(self.id, Rc::new(scales)), &[self.id])
    }

    pub fn scale(self, s: f64) -> Result<Var<'t>, TensorError> {
        let v = self.value().map(|x| x * s);
        self.tape.push("scale", v, Op::Scale(self.id, s), &[self.id])
    }

    pub fn tanh(self) -> Result<Var<'t>, TensorError> {
        let v = self.value().map(f64::tanh);
        self.tape.push("tanh", v, Op::Tanh(self.id), &[self.id])
    }

    pub fn relu(self) -> Result<Var<'t>, TensorError> {
        let v = self.value().map(|x| x.max(0.0));
        self.tape.push("relu", v, Op::Relu(self.id), &[self.id])
    }

    pub fn sigmoid(self) -> Result<Var<'t>, TensorError> {
        let v = self.value().map(sigmoid);
        self.tape.push("sigmoid", v, Op::Sigmoid(self.id), &[self.id])
    }

    pub fn transpose(self) -> Result<Var<'t>, TensorError> {
        let v = self.value().transpose();
        self.tape.push("transpose", v, Op::Transpose(self.id), &[self.id])
    }

    /// Columns `start..end`.
    pub fn slice_cols(self, start: usize, end: usize) -> Result<Var<'t>, TensorError> {
        let a = self.value();
        if start > end || end > a.cols() {
            return Err(shape_err("slice_cols", a.shape(), (start, end)));
        }
        let w = end - start;
        let mut data = Vec::with_capacity(a.rows() * w);
        for r in 0..a.rows() {
            data.extend_from_slice(&a.row(r)[start..end]);
        }
        let v = Tensor::from_vec(a.rows(), w, data)?;
        self.tape.push("slice_cols", v, Op::SliceCols(self.id, start), &[self.id])
    }

    pub fn concat_cols(parts: &[Var<'t>]) -> Result<Var<'t>, TensorError> {
        let first = parts.first().ok_or(TensorError::EmptyInput("concat_cols"))?;
        let values: Vec<Rc<Tensor>> = parts.iter().map(|p| p.value()).collect();
        let rows = values[0].rows();
        let cols: usize = values.iter().map(|v| v.cols()).sum();
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut offset = 0;
            for v in &values {
                if v.rows() != rows {
                    return Err(shape_err("concat_cols", values[0].shape(), v.shape()));
                }
                out.row_mut(r)[offset..offset + v.cols()].copy_from_slice(v.row(r));
                offset += v.cols();
            }
        }
        let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
        first.tape.push("concat_cols", out, Op::ConcatCols(ids.clone()), &ids)
    }

    pub fn concat_rows(parts: &[Var<'t>]) -> Result<Var<'t>, TensorError> {
        let first = parts.first().ok_or(TensorError::EmptyInput("concat_rows"))?;
        let values: Vec<Rc<Tensor>> = parts.iter().map(|p| p.value()).collect();
        let cols = values[0].cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for v in &values {
            if v.cols() != cols {
                return Err(shape_err("concat_rows", values[0].shape(), v.shape()));
            }
            data.extend_from_slice(v.data());
            rows += v.rows();
        }
        let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
        first
            .tape
            .push("concat_rows", Tensor::from_vec(rows, cols, data)?, Op::ConcatRows(ids.clone()), &ids)
    }

    /// Row `k` of the output is row `indices[k]` of `self`.
    pub fn gather_rows(self, indices: Vec<usize>) -> Result<Var<'t>, TensorError> {
        let a = self.value();
        let mut data = Vec::with_capacity(indices.len() * a.cols());
        for &i in &indices {
            if i >= a.rows() {
                return Err(TensorError::IndexOutOfRange { index: i, len: a.rows() });
            }
            data.extend_from_slice(a.row(i));
        }
        let v = Tensor::from_vec(indices.len(), a.cols(), data)?;
        self.tape
            .push("gather_rows", v, Op::GatherRows(self.id, Rc::new(indices)), &[self.id])
    }

    /// Row-wise `softmax(x / scale)` over the entries where `mask` is true.
    /// Masked entries come out exactly zero.
    pub fn row_softmax_scaled(
        self,
        scale: f64,
        mask: Option<&[bool]>,
        empty: EmptyRows,
    ) -> Result<Var<'t>, TensorError> {
        if !(scale > 0.0) {
            return Err(TensorError::InvalidArgument("softmax scale must be positive"));
        }
        let a = self.value();
        if let Some(m) = mask {
            if m.len() != a.len() {
                return Err(shape_err("row_softmax_scaled", a.shape(), (m.len(), 1)));
            }
        }
        let cols = a.cols();
        let mut out = Tensor::zeros(a.rows(), cols);
        for r in 0..a.rows() {
            let keep = |c: usize| mask.is_none_or(|m| m[r * cols + c]);
            let row = a.row(r);
            let max = (0..cols)
                .filter(|&c| keep(c))
                .map(|c| row[c] / scale)
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                match empty {
                    EmptyRows::Error => return Err(TensorError::AllMaskedRow { row: r }),
                    EmptyRows::Zero => continue,
                }
            }
            let o = out.row_mut(r);
            let mut total = 0.0;
            for c in 0..cols {
                if keep(c) {
                    o[c] = (row[c] / scale - max).exp();
                    total += o[c];
                }
            }
            o.iter_mut().for_each(|v| *v /= total);
        }
        self.tape.push(
            "row_softmax_scaled",
            out,
            Op::Softmax {
                input: self.id,
                scale,
            },
            &[self.id],
        )
    }

    pub fn layer_norm(self, gain: Var<'t>, bias: Var<'t>, eps: f64) -> Result<Var<'t>, TensorError> {
        let x = self.value();
        let (g, b) = (gain.value(), bias.value());
        let d = x.cols();
        if g.shape() != (1, d) || b.shape() != (1, d) {
            return Err(shape_err("layer_norm", x.shape(), g.shape()));
        }
        let mut xhat = Tensor::zeros(x.rows(), d);
        let mut inv_std = Vec::with_capacity(x.rows());
        let mut out = Tensor::zeros(x.rows(), d);
        for r in 0..x.rows() {
            let row = x.row(r);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + eps).sqrt();
            inv_std.push(inv);
            for c in 0..d {
                let h = (row[c] - mean) * inv;
                xhat.set(r, c, h);
                out.set(r, c, h * g.data()[c] + b.data()[c]);
            }
        }
        self.tape.push(
            "layer_norm",
            out,
            Op::LayerNorm {
                x: self.id,
                gain: gain.id,
                bias: bias.id,
                xhat,
                inv_std,
            },
            &[self.id, gain.id, bias.id],
        )
    }

    /// `out[i][j] = self[i] · pairs[i * m + j]` for `pairs` with `n * m` rows.
    pub fn pair_dot(self, pairs: Var<'t>, m: usize) -> Result<Var<'t>, TensorError> {
        let (q, p) = (self.value(), pairs.value());
        if p.rows() != q.rows() * m || p.cols() != q.cols() {
            return Err(shape_err("pair_dot", q.shape(), p.shape()));
        }
        let mut out = Tensor::zeros(q.rows(), m);
        for i in 0..q.rows() {
            for j in 0..m {
                out.set(i, j, dot(q.row(i), p.row(i * m + j)));
            }
        }
        self.tape
            .push("pair_dot", out, Op::PairDot(self.id, pairs.id), &[self.id, pairs.id])
    }

    /// `out[i] = Σ_j self[i][j] · pairs[i * m + j]` where `self` is `n×m`.
    pub fn pair_weighted_sum(self, pairs: Var<'t>) -> Result<Var<'t>, TensorError> {
        let (a, p) = (self.value(), pairs.value());
        let m = a.cols();
        if p.rows() != a.rows() * m {
            return Err(shape_err("pair_weighted_sum", a.shape(), p.shape()));
        }
        let mut out = Tensor::zeros(a.rows(), p.cols());
        for i in 0..a.rows() {
            for j in 0..m {
                let w = a.get(i, j);
                if w == 0.0 {
                    continue;
                }
                for (o, v) in out.row_mut(i).iter_mut().zip(p.row(i * m + j)) {
                    *o += w * v;
                }
            }
        }
        self.tape.push(
            "pair_weighted_sum",
            out,
            Op::PairWeightedSum(self.id, pairs.id),
            &[self.id, pairs.id],
        )
    }

    /// Per-row inner product, `n×1`.
    pub fn row_dot(self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        let (a, b) = (self.value(), other.value());
        if a.shape() != b.shape() {
            return Err(shape_err("row_dot", a.shape(), b.shape()));
        }
        let data = (0..a.rows()).map(|r| dot(a.row(r), b.row(r))).collect();
        let v = Tensor::from_vec(a.rows(), 1, data)?;
        self.tape
            .push("row_dot", v, Op::RowDot(self.id, other.id), &[self.id, other.id])
    }

    pub fn sum(self) -> Result<Var<'t>, TensorError> {
        let v = Tensor::scalar(self.value().sum());
        self.tape.push("sum", v, Op::Sum(self.id), &[self.id])
    }

    /// Summed binary cross-entropy of `sigmoid(self)` against 0/1 labels,
    /// evaluated in the numerically stable logit form.
    pub fn sigmoid_bce(self, labels: &[f64], pos_weight: f64) -> Result<Var<'t>, TensorError> {
        let z = self.value();
        if z.cols() != 1 || z.rows() != labels.len() {
            return Err(shape_err("sigmoid_bce", z.shape(), (labels.len(), 1)));
        }
        let loss: f64 = z
            .data()
            .iter()
            .zip(labels)
            .map(|(&zv, &y)| pos_weight * y * softplus(-zv) + (1.0 - y) * softplus(zv))
            .sum();
        self.tape.push(
            "sigmoid_bce",
            Tensor::scalar(loss),
            Op::SigmoidBce {
                logits: self.id,
                labels: Rc::new(labels.to_vec()),
                pos_weight,
            },
            &[self.id],
        )
    }

    /// Inverted dropout: zeroes entries with probability `rate` and rescales
    /// the survivors. Identity when `rate == 0`.
    pub fn dropout<R: Rng + ?Sized>(self, rate: f64, rng: &mut R) -> Result<Var<'t>, TensorError> {
        if rate <= 0.0 {
            return Ok(self);
        }
        if rate >= 1.0 {
            return Err(TensorError::InvalidArgument("dropout rate must be below 1"));
        }
        let (r, c) = self.shape();
        let keep = 1.0 / (1.0 - rate);
        let mask: Vec<f64> = (0..r * c)
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let mask = self.tape.constant(Tensor::from_vec(r, c, mask)?);
        self.mul(mask)
    }
}
