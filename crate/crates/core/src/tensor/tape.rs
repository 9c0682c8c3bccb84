//! Reverse-mode gradient tape over dense tensors.
//!
//! Operations are recorded as they execute, so node `i` only ever refers to
//! nodes `< i`. A backward sweep walks the list in reverse, accumulating
//! adjoints, and hands back one [`Gradients`] map per requested root.
//! Parameters are read in place from the borrowed [`ParamStore`]; embedding
//! lookups accumulate row-sparse gradients.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Grad, Gradients, ParamStore, Tensor};

/// Handle to a recorded value on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Constant,
    Param(usize),
    Gather { param: usize, row: usize },
    MatMul(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    MulConst(Var, Vec<T>),
    Scale(Var, T),
    Sigmoid(Var),
    Tanh(Var),
    Concat(Vec<Var>),
    Slice { src: Var, start: usize },
    Sum(Var),
    AddN(Vec<Var>),
    SoftmaxCe { logits: Var, label: usize, probs: Vec<T> },
}

#[derive(Debug)]
struct Node<T> {
    shape: Vec<usize>,
    // `None` for parameter nodes, which read from the store.
    value: Option<Vec<T>>,
    op: Op<T>,
}

/// Records one forward computation against a read-only parameter store.
pub struct Tape<'p, T: Scalar> {
    params: &'p ParamStore<T>,
    nodes: Vec<Node<T>>,
    param_vars: Vec<Option<Var>>,
    consumed: bool,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl<'p, T: Scalar> Tape<'p, T> {
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            param_vars: vec![None; params.len()],
            consumed: false,
        }
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed
    }

    fn push(&mut self, shape: Vec<usize>, value: Option<Vec<T>>, op: Op<T>) -> Var {
        self.nodes.push(Node { shape, value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[T] {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(data), _) => data,
            (None, Op::Param(i)) => self.params.by_index(*i).data(),
            (None, _) => unreachable!("only parameter nodes borrow their value"),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn tensor(&self, v: Var) -> Tensor<T> {
        Tensor::new(self.shape(v).to_vec(), self.value(v).to_vec())
            .expect("recorded nodes have consistent shapes")
    }

    /// Value of a one-element node.
    pub fn scalar(&self, v: Var) -> T {
        self.value(v)[0]
    }

    /// A non-trainable input.
    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        let shape = t.shape().to_vec();
        self.push(shape, Some(t.into_data()), Op::Constant)
    }

    pub fn zeros(&mut self, len: usize) -> Var {
        self.push(vec![len], Some(vec![T::zero(); len]), Op::Constant)
    }

    /// Trainable parameter by store index. Repeated calls return the same node.
    pub fn param_at(&mut self, index: usize) -> Var {
        if let Some(v) = self.param_vars[index] {
            return v;
        }
        let shape = self.params.by_index(index).shape().to_vec();
        let v = self.push(shape, None, Op::Param(index));
        self.param_vars[index] = Some(v);
        v
    }

    pub fn param(&mut self, name: &str) -> Result<Var> {
        let i = self.params.index_of(name)?;
        Ok(self.param_at(i))
    }

    /// Row `row` of a rank-2 parameter (embedding lookup).
    pub fn gather(&mut self, name: &str, row: usize) -> Result<Var> {
        let param = self.params.index_of(name)?;
        let table = self.params.by_index(param);
        if table.shape().len() != 2 {
            return Err(Error::InvalidTensor(format!(
                "gather needs a matrix, `{name}` has shape {:?}",
                table.shape()
            )));
        }
        let rows = table.shape()[0];
        if row >= rows {
            return Err(Error::TokenOutOfRange {
                id: row,
                vocab_size: rows,
            });
        }
        let data = table.row(row).to_vec();
        Ok(self.push(vec![data.len()], Some(data), Op::Gather { param, row }))
    }

    /// Matrix product. `a` is `(m, k)`; `b` is `(k, n)` or a length-`k`
    /// vector, in which case the result is a length-`m` vector.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let mismatch = || Error::ShapeMismatch {
            op: "matmul",
            left: sa.clone(),
            right: sb.clone(),
        };
        if sa.len() != 2 || sb.is_empty() || sb.len() > 2 {
            return Err(mismatch());
        }
        let (m, k) = (sa[0], sa[1]);
        if sb[0] != k {
            return Err(mismatch());
        }
        let n = if sb.len() == 2 { sb[1] } else { 1 };
        let av = self.value(a);
        let bv = self.value(b);
        let mut out = vec![T::zero(); m * n];
        if n == 1 {
            for (o, row) in out.iter_mut().zip(av.chunks_exact(k)) {
                *o = dot(row, bv);
            }
        } else {
            for i in 0..m {
                for p in 0..k {
                    let aip = av[i * k + p];
                    let orow = &mut out[i * n..(i + 1) * n];
                    for (o, &bpj) in orow.iter_mut().zip(&bv[p * n..(p + 1) * n]) {
                        *o += aip * bpj;
                    }
                }
            }
        }
        let shape = if sb.len() == 2 { vec![m, n] } else { vec![m] };
        Ok(self.push(shape, Some(out), Op::MatMul(a, b)))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::ShapeMismatch {
                op,
                left: self.shape(a).to_vec(),
                right: self.shape(b).to_vec(),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| x + y)
            .collect();
        Ok(self.push(self.shape(a).to_vec(), Some(out), Op::Add(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| x * y)
            .collect();
        Ok(self.push(self.shape(a).to_vec(), Some(out), Op::Mul(a, b)))
    }

    /// Elementwise product with a fixed (non-differentiable) factor.
    pub fn mul_const(&mut self, a: Var, factor: Vec<T>) -> Result<Var> {
        if factor.len() != self.value(a).len() {
            return Err(Error::ShapeMismatch {
                op: "mul_const",
                left: self.shape(a).to_vec(),
                right: vec![factor.len()],
            });
        }
        let out = self
            .value(a)
            .iter()
            .zip(&factor)
            .map(|(&x, &y)| x * y)
            .collect();
        Ok(self.push(self.shape(a).to_vec(), Some(out), Op::MulConst(a, factor)))
    }

    pub fn scale(&mut self, a: Var, factor: T) -> Var {
        let out = self.value(a).iter().map(|&x| x * factor).collect();
        self.push(self.shape(a).to_vec(), Some(out), Op::Scale(a, factor))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).iter().map(|&x| sigmoid(x)).collect();
        self.push(self.shape(a).to_vec(), Some(out), Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).iter().map(|&x| x.tanh()).collect();
        self.push(self.shape(a).to_vec(), Some(out), Op::Tanh(a))
    }

    /// Concatenates vectors end to end.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::EmptySequence("concat of zero parts"));
        }
        let mut out = Vec::new();
        for &p in parts {
            if self.shape(p).len() != 1 {
                return Err(Error::ShapeMismatch {
                    op: "concat",
                    left: self.shape(parts[0]).to_vec(),
                    right: self.shape(p).to_vec(),
                });
            }
            out.extend_from_slice(self.value(p));
        }
        let len = out.len();
        Ok(self.push(vec![len], Some(out), Op::Concat(parts.to_vec())))
    }

    /// Contiguous sub-vector `[start, start + len)`.
    pub fn slice(&mut self, src: Var, start: usize, len: usize) -> Result<Var> {
        let total = self.value(src).len();
        if self.shape(src).len() != 1 || len == 0 || start + len > total {
            return Err(Error::ShapeMismatch {
                op: "slice",
                left: self.shape(src).to_vec(),
                right: vec![start, len],
            });
        }
        let out = self.value(src)[start..start + len].to_vec();
        Ok(self.push(vec![len], Some(out), Op::Slice { src, start }))
    }

    /// Sum of all entries, as a one-element node.
    pub fn sum(&mut self, a: Var) -> Var {
        let s: T = self.value(a).iter().copied().sum();
        self.push(vec![1], Some(vec![s]), Op::Sum(a))
    }

    /// Elementwise sum of equally shaped nodes.
    pub fn add_n(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or(Error::EmptySequence("add_n of zero parts"))?;
        let mut out = self.value(first).to_vec();
        for &p in &parts[1..] {
            self.same_shape("add_n", first, p)?;
            for (o, &v) in out.iter_mut().zip(self.value(p)) {
                *o += v;
            }
        }
        Ok(self.push(self.shape(first).to_vec(), Some(out), Op::AddN(parts.to_vec())))
    }

    /// Inverted dropout: zeroes each entry with probability `rate` and
    /// rescales survivors by `1 / (1 - rate)`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, a: Var, rate: f64, rng: &mut R) -> Result<Var> {
        if rate <= 0.0 {
            return Ok(a);
        }
        if rate >= 1.0 {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        let keep = T::of(1.0 / (1.0 - rate));
        let mask = (0..self.value(a).len())
            .map(|_| if rng.gen::<f64>() < rate { T::zero() } else { keep })
            .collect();
        self.mul_const(a, mask)
    }

    /// Softmax cross-entropy of a logit vector against a class index; the
    /// loss node is scalar.
    pub fn softmax_cross_entropy(&mut self, logits: Var, label: usize) -> Result<Var> {
        let (loss, probs) = softmax_ce_values(self.value(logits), label)?;
        Ok(self.push(
            vec![1],
            Some(vec![loss]),
            Op::SoftmaxCe {
                logits,
                label,
                probs: probs.into_data(),
            },
        ))
    }

    /// Probabilities cached by a [`Tape::softmax_cross_entropy`] node.
    pub fn probs(&self, loss: Var) -> Option<&[T]> {
        match &self.nodes[loss.0].op {
            Op::SoftmaxCe { probs, .. } => Some(probs),
            _ => None,
        }
    }

    /// Gradient of a scalar node with respect to every parameter.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<T>> {
        Ok(self.backward_multi(&[loss])?.pop().expect("one root"))
    }

    /// Independent gradient maps for several scalar roots, computed from one
    /// recording. Consumes the tape.
    pub fn backward_multi(&mut self, roots: &[Var]) -> Result<Vec<Gradients<T>>> {
        if self.consumed {
            return Err(Error::TapeConsumed);
        }
        for &r in roots {
            if numel(self.shape(r)) != 1 {
                return Err(Error::NonScalarLoss(self.shape(r).to_vec()));
            }
        }
        let out = roots.iter().map(|&r| self.sweep(r)).collect();
        self.consumed = true;
        Ok(out)
    }

    fn sweep(&self, root: Var) -> Gradients<T> {
        let mut adj: Vec<Option<Vec<T>>> = vec![None; root.0 + 1];
        adj[root.0] = Some(vec![T::one()]);
        let mut dense: Vec<Option<Vec<T>>> = vec![None; self.params.len()];
        let mut rows: BTreeMap<usize, BTreeMap<usize, Vec<T>>> = BTreeMap::new();

        for i in (0..=root.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Constant => {}
                Op::Param(p) => dense[*p] = Some(g),
                Op::Gather { param, row } => {
                    let slot = rows
                        .entry(*param)
                        .or_default()
                        .entry(*row)
                        .or_insert_with(|| vec![T::zero(); g.len()]);
                    add_into(slot, &g);
                }
                Op::MatMul(a, b) => {
                    let (a, b) = (*a, *b);
                    let sa = self.shape(a);
                    let (m, k) = (sa[0], sa[1]);
                    let n = numel(self.shape(b)) / k;
                    let av = self.value(a);
                    let bv = self.value(b);
                    // dA = dC · Bᵀ
                    {
                        let da = slot(&mut adj, a, m * k);
                        for i in 0..m {
                            let gi = &g[i * n..(i + 1) * n];
                            let row = &mut da[i * k..(i + 1) * k];
                            if n == 1 {
                                let gi = gi[0];
                                for (d, &bp) in row.iter_mut().zip(bv) {
                                    *d += gi * bp;
                                }
                            } else {
                                for (p, d) in row.iter_mut().enumerate() {
                                    *d += dot(gi, &bv[p * n..(p + 1) * n]);
                                }
                            }
                        }
                    }
                    // dB = Aᵀ · dC
                    {
                        let db = slot(&mut adj, b, k * n);
                        for i in 0..m {
                            let gi = &g[i * n..(i + 1) * n];
                            let arow = &av[i * k..(i + 1) * k];
                            for (p, &aip) in arow.iter().enumerate() {
                                for (d, &gij) in db[p * n..(p + 1) * n].iter_mut().zip(gi) {
                                    *d += aip * gij;
                                }
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    add_into(slot(&mut adj, *a, g.len()), &g);
                    add_into(slot(&mut adj, *b, g.len()), &g);
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    let bv = self.value(b);
                    let da = slot(&mut adj, a, g.len());
                    for ((d, &gi), &y) in da.iter_mut().zip(&g).zip(bv) {
                        *d += gi * y;
                    }
                    let av = self.value(a);
                    let db = slot(&mut adj, b, g.len());
                    for ((d, &gi), &x) in db.iter_mut().zip(&g).zip(av) {
                        *d += gi * x;
                    }
                }
                Op::MulConst(a, factor) => {
                    let da = slot(&mut adj, *a, g.len());
                    for ((d, &gi), &f) in da.iter_mut().zip(&g).zip(factor) {
                        *d += gi * f;
                    }
                }
                Op::Scale(a, factor) => {
                    let da = slot(&mut adj, *a, g.len());
                    for (d, &gi) in da.iter_mut().zip(&g) {
                        *d += gi * *factor;
                    }
                }
                Op::Sigmoid(a) => {
                    let y = node.value.as_deref().expect("owned");
                    let da = slot(&mut adj, *a, g.len());
                    for ((d, &gi), &yi) in da.iter_mut().zip(&g).zip(y) {
                        *d += gi * yi * (T::one() - yi);
                    }
                }
                Op::Tanh(a) => {
                    let y = node.value.as_deref().expect("owned");
                    let da = slot(&mut adj, *a, g.len());
                    for ((d, &gi), &yi) in da.iter_mut().zip(&g).zip(y) {
                        *d += gi * (T::one() - yi * yi);
                    }
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = numel(self.shape(p));
                        add_into(slot(&mut adj, p, len), &g[offset..offset + len]);
                        offset += len;
                    }
                }
                Op::Slice { src, start } => {
                    let len = numel(self.shape(*src));
                    let ds = slot(&mut adj, *src, len);
                    add_into(&mut ds[*start..*start + g.len()], &g);
                }
                Op::Sum(a) => {
                    let len = numel(self.shape(*a));
                    let da = slot(&mut adj, *a, len);
                    for d in da.iter_mut() {
                        *d += g[0];
                    }
                }
                Op::AddN(parts) => {
                    for &p in parts {
                        add_into(slot(&mut adj, p, g.len()), &g);
                    }
                }
                Op::SoftmaxCe {
                    logits,
                    label,
                    probs,
                } => {
                    let dl = slot(&mut adj, *logits, probs.len());
                    for (c, (d, &p)) in dl.iter_mut().zip(probs).enumerate() {
                        let target = if c == *label { T::one() } else { T::zero() };
                        *d += g[0] * (p - target);
                    }
                }
            }
        }

        let grads = (0..self.params.len())
            .map(|p| {
                let shape = self.params.by_index(p).shape().to_vec();
                match (dense[p].take(), rows.remove(&p)) {
                    (Some(d), None) => {
                        Grad::Dense(Tensor::new(shape, d).expect("adjoint matches param"))
                    }
                    (None, Some(r)) => Grad::Rows { shape, rows: r },
                    (None, None) => Grad::Zero(shape),
                    (Some(mut d), Some(r)) => {
                        let cols = shape[1];
                        for (row, vals) in r {
                            add_into(&mut d[row * cols..(row + 1) * cols], &vals);
                        }
                        Grad::Dense(Tensor::new(shape, d).expect("adjoint matches param"))
                    }
                }
            })
            .collect();
        Gradients::from_parts(self.params.names().to_vec(), grads)
    }
}

fn slot<T: Scalar>(adj: &mut [Option<Vec<T>>], v: Var, len: usize) -> &mut Vec<T> {
    adj[v.0].get_or_insert_with(|| vec![T::zero(); len])
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[inline]
pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Numerically stable softmax and cross-entropy, outside any tape.
pub fn softmax_ce_values<T: Scalar>(logits: &[T], label: usize) -> Result<(T, Tensor<T>)> {
    if label >= logits.len() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    let loss = total.ln() - (logits[label] - max);
    let probs = exps.into_iter().map(|e| e / total).collect();
    Ok((loss, Tensor::vector(probs)))
}

/// Softmax cross-entropy of a standalone logit tensor; returns `(loss, probs)`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, label: usize) -> Result<(T, Tensor<T>)> {
    softmax_ce_values(logits.data(), label)
}
