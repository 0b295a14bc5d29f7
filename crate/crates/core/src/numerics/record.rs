//! Reverse-mode differentiation over an explicit, append-only op record.
//!
//! Every op appends a node holding its result and the indices of its
//! operands. Operands always precede their consumer, so walking the node
//! list backwards is a valid reverse topological order.

use std::collections::{BTreeMap, HashMap};

use super::param::{ParamId, ParamSet};
use super::tensor::{gemm_acc, gemm_nt_acc, gemm_tn_acc, log_softmax_slice, softmax_slice, Tensor};
use crate::error::{Error, Result};

/// Handle to a node in a [`ComputationRecord`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    OneMinus(Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Row(Var, usize),
    Concat(Vec<Var>),
    StackRows(Vec<Var>),
    MeanRows(Var),
    Reshape(Var),
    Softmax(Var),
    LogSoftmax(Var),
    CrossEntropy(Var, usize),
    Sum(Vec<Var>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Gradients produced by [`ComputationRecord::backward`], keyed by parameter.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Gradients {
    by_param: BTreeMap<ParamId, Vec<f64>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.by_param.get(&id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &[f64])> {
        self.by_param.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    pub fn is_empty(&self) -> bool {
        self.by_param.is_empty()
    }
}

#[derive(Debug, Default)]
pub struct ComputationRecord {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
}

fn dim_err(op: &str, a: &Tensor, b: &Tensor) -> Error {
    Error::Dimension(format!("{op}: incompatible shapes {:?} and {:?}", a.shape(), b.shape()))
}

impl ComputationRecord {
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

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// A constant input; receives no gradient.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Brings a parameter into the record. Repeated calls return the same node.
    pub fn param(&mut self, params: &ParamSet, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(params.get(id).value.clone(), Op::Param(id));
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k) = ta.dims2();
        let (k2, n) = tb.dims2();
        if k != k2 {
            return Err(Error::Dimension(format!(
                "matmul inner dimensions disagree: {:?} × {:?}",
                ta.shape(),
                tb.shape()
            )));
        }
        let mut out = vec![0.0; m * n];
        gemm_acc(ta.values(), tb.values(), &mut out, m, k, n);
        Ok(self.push(Tensor::from_parts(vec![m, n], out), Op::MatMul(a, b)))
    }

    fn zip_same(&mut self, a: Var, b: Var, name: &str, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(dim_err(name, ta, tb));
        }
        let out = ta.values().iter().zip(tb.values()).map(|(&x, &y)| f(x, y)).collect();
        let shape = ta.shape().to_vec();
        Ok(self.push(Tensor::from_parts(shape, out), op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds the `1×n` row `b` to every row of the `m×n` matrix `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, n) = ta.dims2();
        if tb.dims2() != (1, n) {
            return Err(dim_err("add_row", ta, tb));
        }
        let row = tb.values();
        let mut out = ta.values().to_vec();
        for r in out.chunks_mut(n) {
            for (o, &x) in r.iter_mut().zip(row) {
                *o += x;
            }
        }
        Ok(self.push(Tensor::from_parts(vec![m, n], out), Op::AddRow(a, b)))
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let ta = self.value(a);
        let out = ta.values().iter().map(|&x| f(x)).collect();
        let shape = ta.shape().to_vec();
        self.push(Tensor::from_parts(shape, out), op)
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        self.map(a, |x| 1.0 - x, Op::OneMinus(a))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.map(a, |x| x * c, Op::Scale(a, c))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    /// Row `i` of a matrix as a `1×n` row vector (embedding lookup).
    pub fn row(&mut self, a: Var, i: usize) -> Result<Var> {
        let ta = self.value(a);
        let (m, n) = ta.dims2();
        if i >= m {
            return Err(Error::Index { index: i, len: m });
        }
        let out = ta.values()[i * n..(i + 1) * n].to_vec();
        Ok(self.push(Tensor::from_parts(vec![1, n], out), Op::Row(a, i)))
    }

    /// Concatenates row vectors end to end.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let mut out = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.dims2().0 != 1 {
                return Err(Error::Dimension(format!("concat expects row vectors, got {:?}", t.shape())));
            }
            out.extend_from_slice(t.values());
        }
        if out.is_empty() {
            return Err(Error::Dimension("concat of nothing".into()));
        }
        let n = out.len();
        Ok(self.push(Tensor::from_parts(vec![1, n], out), Op::Concat(parts.to_vec())))
    }

    /// Stacks equal-length row vectors into a matrix.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Result<Var> {
        let Some(&first) = rows.first() else {
            return Err(Error::Dimension("stack of nothing".into()));
        };
        let n = self.value(first).len();
        let mut out = Vec::with_capacity(n * rows.len());
        for &r in rows {
            let t = self.value(r);
            if t.dims2() != (1, n) {
                return Err(dim_err("stack_rows", self.value(first), t));
            }
            out.extend_from_slice(t.values());
        }
        Ok(self.push(Tensor::from_parts(vec![rows.len(), n], out), Op::StackRows(rows.to_vec())))
    }

    pub fn mean_rows(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let (m, n) = ta.dims2();
        let mut out = vec![0.0; n];
        for r in ta.values().chunks(n) {
            for (o, &x) in out.iter_mut().zip(r) {
                *o += x;
            }
        }
        for o in &mut out {
            *o /= m as f64;
        }
        self.push(Tensor::from_parts(vec![1, n], out), Op::MeanRows(a))
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let t = self.value(a).reshape(shape)?;
        Ok(self.push(t, Op::Reshape(a)))
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        if ta.is_empty() {
            return Err(Error::Dimension("softmax of an empty tensor".into()));
        }
        let t = Tensor::from_parts(ta.shape().to_vec(), softmax_slice(ta.values()));
        Ok(self.push(t, Op::Softmax(a)))
    }

    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        if ta.is_empty() {
            return Err(Error::Dimension("log_softmax of an empty tensor".into()));
        }
        let t = Tensor::from_parts(ta.shape().to_vec(), log_softmax_slice(ta.values()));
        Ok(self.push(t, Op::LogSoftmax(a)))
    }

    /// `-log softmax(logits)[target]` as a scalar node.
    pub fn cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var> {
        let t = super::tensor::cross_entropy(self.value(logits), target)?;
        Ok(self.push(t, Op::CrossEntropy(logits, target)))
    }

    /// Sum of scalar nodes.
    pub fn sum(&mut self, terms: &[Var]) -> Result<Var> {
        let mut total = 0.0;
        for &t in terms {
            let v = self.value(t);
            if !v.is_scalar() {
                return Err(Error::Dimension(format!("sum expects scalars, got {:?}", v.shape())));
            }
            total += v.item();
        }
        Ok(self.push(Tensor::scalar(total), Op::Sum(terms.to_vec())))
    }

    /// Gradients of the scalar `loss` with respect to every parameter
    /// reachable from it. Each node is visited once, in reverse order.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        let mut out = Gradients::default();

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => {
                    out.by_param.insert(*id, g);
                }
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (m, k) = ta.dims2();
                    let n = tb.dims2().1;
                    let ga = acc(&mut grads, *a, ta.len());
                    gemm_nt_acc(&g, tb.values(), ga, m, k, n);
                    let gb = acc(&mut grads, *b, tb.len());
                    gemm_tn_acc(ta.values(), &g, gb, m, k, n);
                }
                Op::Add(a, b) => {
                    add_into(acc(&mut grads, *a, g.len()), &g);
                    add_into(acc(&mut grads, *b, g.len()), &g);
                }
                Op::Sub(a, b) => {
                    add_into(acc(&mut grads, *a, g.len()), &g);
                    for (o, x) in acc(&mut grads, *b, g.len()).iter_mut().zip(&g) {
                        *o -= x;
                    }
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    for ((o, x), y) in acc(&mut grads, *a, g.len()).iter_mut().zip(&g).zip(tb.values()) {
                        *o += x * y;
                    }
                    for ((o, x), y) in acc(&mut grads, *b, g.len()).iter_mut().zip(&g).zip(ta.values()) {
                        *o += x * y;
                    }
                }
                Op::AddRow(a, b) => {
                    add_into(acc(&mut grads, *a, g.len()), &g);
                    let n = self.value(*b).len();
                    let gb = acc(&mut grads, *b, n);
                    for r in g.chunks(n) {
                        add_into(gb, r);
                    }
                }
                Op::OneMinus(a) => {
                    for (o, x) in acc(&mut grads, *a, g.len()).iter_mut().zip(&g) {
                        *o -= x;
                    }
                }
                Op::Scale(a, c) => {
                    for (o, x) in acc(&mut grads, *a, g.len()).iter_mut().zip(&g) {
                        *o += c * x;
                    }
                }
                Op::Sigmoid(a) => {
                    let y = node.value.values();
                    for ((o, x), s) in acc(&mut grads, *a, g.len()).iter_mut().zip(&g).zip(y) {
                        *o += x * s * (1.0 - s);
                    }
                }
                Op::Tanh(a) => {
                    let y = node.value.values();
                    for ((o, x), t) in acc(&mut grads, *a, g.len()).iter_mut().zip(&g).zip(y) {
                        *o += x * (1.0 - t * t);
                    }
                }
                Op::Row(a, i) => {
                    let len = self.value(*a).len();
                    let n = g.len();
                    add_into(&mut acc(&mut grads, *a, len)[i * n..(i + 1) * n], &g);
                }
                Op::Concat(parts) | Op::StackRows(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let n = self.value(*p).len();
                        add_into(acc(&mut grads, *p, n), &g[off..off + n]);
                        off += n;
                    }
                }
                Op::MeanRows(a) => {
                    let ta = self.value(*a);
                    let (m, n) = ta.dims2();
                    let ga = acc(&mut grads, *a, ta.len());
                    for r in ga.chunks_mut(n) {
                        for (o, x) in r.iter_mut().zip(&g) {
                            *o += x / m as f64;
                        }
                    }
                }
                Op::Reshape(a) => add_into(acc(&mut grads, *a, g.len()), &g),
                Op::Softmax(a) => {
                    let s = node.value.values();
                    let dot: f64 = g.iter().zip(s).map(|(x, y)| x * y).sum();
                    for ((o, x), y) in acc(&mut grads, *a, g.len()).iter_mut().zip(&g).zip(s) {
                        *o += y * (x - dot);
                    }
                }
                Op::LogSoftmax(a) => {
                    let ls = node.value.values();
                    let total: f64 = g.iter().sum();
                    for ((o, x), l) in acc(&mut grads, *a, g.len()).iter_mut().zip(&g).zip(ls) {
                        *o += x - l.exp() * total;
                    }
                }
                Op::CrossEntropy(logits, target) => {
                    let tl = self.value(*logits);
                    let p = softmax_slice(tl.values());
                    let ga = acc(&mut grads, *logits, tl.len());
                    for (i, (o, pi)) in ga.iter_mut().zip(p).enumerate() {
                        let onehot = if i == *target { 1.0 } else { 0.0 };
                        *o += g[0] * (pi - onehot);
                    }
                }
                Op::Sum(terms) => {
                    for t in terms {
                        acc(&mut grads, *t, 1)[0] += g[0];
                    }
                }
            }
        }
        Ok(out)
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn acc(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
    grads[v.0].get_or_insert_with(|| vec![0.0; len]).as_mut_slice()
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set_with(values: &[(&str, Tensor)]) -> (ParamSet, Vec<ParamId>) {
        let mut ps = ParamSet::new();
        let ids = values
            .iter()
            .map(|(name, t)| ps.register(name, t.clone()).unwrap())
            .collect();
        (ps, ids)
    }

    #[test]
    fn linear_loss_gradient_is_input() {
        let w = Tensor::row(vec![0.5, -1.0, 2.0]).unwrap();
        let (ps, ids) = set_with(&[("w", w)]);
        let mut rec = ComputationRecord::new();
        let wv = rec.param(&ps, ids[0]);
        let x = rec.input(Tensor::matrix(3, 1, vec![3.0, 4.0, -5.0]).unwrap());
        let loss = rec.matmul(wv, x).unwrap();
        let g = rec.backward(loss).unwrap();
        assert_eq!(g.get(ids[0]).unwrap(), &[3.0, 4.0, -5.0]);
    }

    #[test]
    fn unreachable_param_gets_no_gradient() {
        let (ps, ids) = set_with(&[
            ("used", Tensor::row(vec![1.0]).unwrap()),
            ("unused", Tensor::row(vec![1.0]).unwrap()),
        ]);
        let mut rec = ComputationRecord::new();
        let u = rec.param(&ps, ids[0]);
        let _ = rec.param(&ps, ids[1]);
        let s = rec.sigmoid(u);
        let loss = rec.reshape(s, vec![1]).unwrap();
        let g = rec.backward(loss).unwrap();
        assert!(g.get(ids[0]).is_some());
        assert!(g.get(ids[1]).is_none());
    }

    #[test]
    fn non_scalar_loss_is_contract_error() {
        let mut rec = ComputationRecord::new();
        let x = rec.input(Tensor::row(vec![1.0, 2.0]).unwrap());
        assert!(matches!(rec.backward(x), Err(Error::Contract(_))));
    }

    /// Central differences through every op kind on a tiny composite.
    #[test]
    fn composite_ops_match_finite_differences() {
        let a = Tensor::matrix(2, 3, vec![0.1, -0.2, 0.3, 0.4, -0.5, 0.6]).unwrap();
        let b = Tensor::row(vec![0.7, -0.1, 0.2]).unwrap();
        let (ps, ids) = set_with(&[("a", a), ("b", b)]);

        let f = |ps: &ParamSet| -> (ComputationRecord, Var) {
            let mut r = ComputationRecord::new();
            let a = r.param(ps, ids[0]);
            let b = r.param(ps, ids[1]);
            let ab = r.add_row(a, b).unwrap();
            let t = r.tanh(ab);
            let m = r.mean_rows(t);
            let r0 = r.row(a, 1).unwrap();
            let s = r.sigmoid(r0);
            let p = r.mul(m, s).unwrap();
            let q = r.one_minus(p);
            let d = r.sub(q, b).unwrap();
            let sc = r.scale(d, 1.5);
            let c = r.concat(&[sc, b]).unwrap();
            let st = r.stack_rows(&[c, c]).unwrap();
            let w = r.input(Tensor::matrix(6, 1, vec![1.0, -2.0, 0.5, 0.3, 0.2, -0.7]).unwrap());
            let col = r.matmul(st, w).unwrap();
            let flat = r.reshape(col, vec![1, 2]).unwrap();
            let sm = r.softmax(flat).unwrap();
            let ls = r.log_softmax(c).unwrap();
            let l1 = r.cross_entropy(ls, 2).unwrap();
            let l2 = r.cross_entropy(sm, 0).unwrap();
            let l3 = r.add(l1, l2).unwrap();
            let loss = r.sum(&[l3, l1]).unwrap();
            (r, loss)
        };

        let (rec, loss) = f(&ps);
        let grads = rec.backward(loss).unwrap();
        let h = 1e-6;
        for &id in &ids {
            let analytic = grads.get(id).unwrap().to_vec();
            for i in 0..ps.get(id).value.len() {
                let mut plus = ps.clone();
                plus.get_mut(id).value.values_mut()[i] += h;
                let mut minus = ps.clone();
                minus.get_mut(id).value.values_mut()[i] -= h;
                let (rp, lp) = f(&plus);
                let (rm, lm) = f(&minus);
                let fd = (rp.value(lp).item() - rm.value(lm).item()) / (2.0 * h);
                assert!((fd - analytic[i]).abs() < 1e-7, "param {id:?}[{i}]: fd {fd} vs {}", analytic[i]);
            }
        }
    }

    #[test]
    fn backward_is_deterministic() {
        let (ps, ids) = set_with(&[("a", Tensor::row(vec![0.3, -0.4, 1.1]).unwrap())]);
        let run = || {
            let mut r = ComputationRecord::new();
            let a = r.param(&ps, ids[0]);
            let t = r.tanh(a);
            let l = r.cross_entropy(t, 1).unwrap();
            r.backward(l).unwrap()
        };
        let (g1, g2) = (run(), run());
        let bits = |g: &Gradients| g.get(ids[0]).unwrap().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&g1), bits(&g2));
    }
}
