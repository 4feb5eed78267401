//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every operation in creation order, so the node list is
//! already a topological order and the backward pass is a single reverse sweep.
//! Parameters are borrowed from a [`ParamStore`] rather than copied.

use std::collections::HashMap;

use super::params::{ParamGrads, ParamId, ParamStore};
use super::Tensor;
use crate::error::{PwiError, Result};

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Storage {
    Owned(Vec<f64>),
    Param(ParamId),
}

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    MatVec(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddScalar(Var, Var),
    Affine(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Concat(Vec<Var>),
    Slice { x: Var, start: usize },
    Reshape(Var),
    Transpose(Var),
    Sum(Var),
    Mean(Var),
    MaxAxis { x: Var, argmax: Vec<usize> },
    MeanAxis { x: Var, axis: usize },
    Softmax(Var),
    CrossEntropy { x: Var, probs: Vec<f64>, class: usize },
    GatherRows { table: Var, ids: Vec<usize> },
    Conv1d { seq: Var, w: Var, b: Var },
    Conv2d { x: Var, w: Var, b: Var },
    MaxPool2d { x: Var, argmax: Vec<usize> },
    PadCrop { x: Var, off_h: usize, off_w: usize },
    PairwiseDot(Var, Var),
    PairwiseCos(Var, Var),
    PairwiseL2(Var, Var),
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    storage: Storage,
    op: Op,
    requires_grad: bool,
}

/// Cosine is reported as 0 when the product of norms falls below this.
const NORM_FLOOR: f64 = 1e-12;

pub struct Graph<'s> {
    store: Option<&'s ParamStore>,
    nodes: Vec<Node>,
    bound: HashMap<ParamId, Var>,
    leaf_grads: HashMap<usize, Vec<f64>>,
}

impl Default for Graph<'_> {
    fn default() -> Self {
        Graph::new()
    }
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl<'s> Graph<'s> {
    /// A graph without parameters; leaves come from [`Graph::input`].
    pub fn new() -> Self {
        Graph {
            store: None,
            nodes: Vec::new(),
            bound: HashMap::new(),
            leaf_grads: HashMap::new(),
        }
    }

    pub fn with_params(store: &'s ParamStore) -> Self {
        Graph {
            store: Some(store),
            ..Graph::new()
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn value(&self, v: Var) -> &[f64] {
        match &self.nodes[v.0].storage {
            Storage::Owned(d) => d,
            Storage::Param(id) => self
                .store
                .expect("param node without store")
                .value(*id)
                .data(),
        }
    }

    pub fn tensor(&self, v: Var) -> Tensor {
        Tensor::new(self.shape(v).to_vec(), self.value(v).to_vec()).expect("node shape is valid")
    }

    /// Value of a single-element node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[0]
    }

    /// Gradient accumulated on a leaf by previous backward passes.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.leaf_grads.get(&v.0).map(Vec::as_slice)
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<f64>, op: Op, requires_grad: bool) -> Var {
        debug_assert_eq!(numel(&shape), data.len());
        self.nodes.push(Node {
            shape,
            storage: Storage::Owned(data),
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Constant leaf; receives no gradient.
    pub fn input(&mut self, t: Tensor) -> Var {
        let shape = t.shape().to_vec();
        self.push(shape, t.into_data(), Op::Input, false)
    }

    /// Leaf that records its gradient, readable through [`Graph::grad`].
    pub fn input_with_grad(&mut self, t: Tensor) -> Var {
        let shape = t.shape().to_vec();
        self.push(shape, t.into_data(), Op::Input, true)
    }

    pub fn constant(&mut self, value: f64) -> Var {
        self.input(Tensor::scalar(value))
    }

    /// Binds a stored parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.bound.get(&id) {
            return v;
        }
        let store = self.store.expect("Graph::param needs a graph built with_params");
        let p = store.get(id);
        self.nodes.push(Node {
            shape: p.value.shape().to_vec(),
            storage: Storage::Param(id),
            op: Op::Param(id),
            requires_grad: !p.frozen,
        });
        let v = Var(self.nodes.len() - 1);
        self.bound.insert(id, v);
        v
    }

    // ---- linear algebra -------------------------------------------------

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(PwiError::shape("matmul", &sa, &sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let x = av[i * k + p];
                if x == 0.0 {
                    continue;
                }
                let brow = &bv[p * n..(p + 1) * n];
                for (o, &bb) in out[i * n..(i + 1) * n].iter_mut().zip(brow) {
                    *o += x * bb;
                }
            }
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(vec![m, n], out, Op::MatMul(a, b), rg))
    }

    /// `W[m×k] · x[k] -> [m]`.
    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var> {
        let (sw, sx) = (self.shape(w).to_vec(), self.shape(x).to_vec());
        if sw.len() != 2 || sx.len() != 1 || sw[1] != sx[0] {
            return Err(PwiError::shape("matvec", &sw, &sx));
        }
        let (m, k) = (sw[0], sw[1]);
        let (wv, xv) = (self.value(w), self.value(x));
        let out: Vec<f64> = (0..m)
            .map(|i| {
                wv[i * k..(i + 1) * k]
                    .iter()
                    .zip(xv)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        let rg = self.rg(w) || self.rg(x);
        Ok(self.push(vec![m], out, Op::MatVec(w, x), rg))
    }

    /// `W·x + b`.
    pub fn linear(&mut self, w: Var, x: Var, b: Var) -> Result<Var> {
        let y = self.matvec(w, x)?;
        self.add(y, b)
    }

    // ---- elementwise ----------------------------------------------------

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(PwiError::shape(op, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    fn zip_with(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let out: Vec<f64> = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        let rg = self.rg(a) || self.rg(b);
        let shape = self.shape(a).to_vec();
        self.push(shape, out, op, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        Ok(self.zip_with(a, b, |x, y| x + y, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        Ok(self.zip_with(a, b, |x, y| x - y, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        Ok(self.zip_with(a, b, |x, y| x * y, Op::Mul(a, b)))
    }

    /// Adds a one-element tensor to every entry of `x`.
    pub fn add_scalar(&mut self, x: Var, s: Var) -> Result<Var> {
        if numel(self.shape(s)) != 1 {
            return Err(PwiError::shape("add_scalar", self.shape(x), self.shape(s)));
        }
        let sv = self.value(s)[0];
        let out: Vec<f64> = self.value(x).iter().map(|v| v + sv).collect();
        let rg = self.rg(x) || self.rg(s);
        let shape = self.shape(x).to_vec();
        Ok(self.push(shape, out, Op::AddScalar(x, s), rg))
    }

    /// `scale * x + shift` with constant coefficients.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        let out: Vec<f64> = self.value(x).iter().map(|v| scale * v + shift).collect();
        let rg = self.rg(x);
        let shape = self.shape(x).to_vec();
        self.push(shape, out, Op::Affine(x, scale), rg)
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        self.affine(x, s, 0.0)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out: Vec<f64> = self.value(x).iter().map(|v| v.tanh()).collect();
        let rg = self.rg(x);
        let shape = self.shape(x).to_vec();
        self.push(shape, out, Op::Tanh(x), rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out: Vec<f64> = self.value(x).iter().map(|&v| sigmoid(v)).collect();
        let rg = self.rg(x);
        let shape = self.shape(x).to_vec();
        self.push(shape, out, Op::Sigmoid(x), rg)
    }

    // ---- structural -----------------------------------------------------

    /// Concatenates along axis 0; trailing dims must agree.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| PwiError::invalid("concat of zero tensors"))?;
        let tail = self.shape(first)[1..].to_vec();
        let mut rows = 0;
        let mut out = Vec::new();
        for &p in parts {
            if self.shape(p)[1..] != tail[..] {
                return Err(PwiError::shape("concat", self.shape(first), self.shape(p)));
            }
            rows += self.shape(p)[0];
            out.extend_from_slice(self.value(p));
        }
        let mut shape = vec![rows];
        shape.extend(tail);
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(shape, out, Op::Concat(parts.to_vec()), rg))
    }

    /// Rows `start..start+len` along axis 0.
    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if len == 0 || start + len > shape[0] {
            return Err(PwiError::invalid(format!(
                "slice {start}..{} out of range for shape {shape:?}",
                start + len
            )));
        }
        let row = numel(&shape[1..]);
        let out = self.value(x)[start * row..(start + len) * row].to_vec();
        let mut new_shape = shape.clone();
        new_shape[0] = len;
        let rg = self.rg(x);
        Ok(self.push(new_shape, out, Op::Slice { x, start }, rg))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        if numel(shape) != numel(self.shape(x)) || shape.contains(&0) {
            return Err(PwiError::shape("reshape", self.shape(x), shape));
        }
        let out = self.value(x).to_vec();
        let rg = self.rg(x);
        Ok(self.push(shape.to_vec(), out, Op::Reshape(x), rg))
    }

    /// Row `i` of a 2-d tensor as a vector.
    pub fn row(&mut self, x: Var, i: usize) -> Result<Var> {
        let cols = self.shape(x)[1..].to_vec();
        let r = self.slice(x, i, 1)?;
        self.reshape(r, &cols)
    }

    /// Stacks equal-length vectors into a `[rows × len]` matrix.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Result<Var> {
        let v = self.concat(rows)?;
        let len = self.shape(rows[0])[0];
        self.reshape(v, &[rows.len(), len])
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 2 {
            return Err(PwiError::shape("transpose", &s, &[]));
        }
        let (r, c) = (s[0], s[1]);
        let xv = self.value(x);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = xv[i * c + j];
            }
        }
        let rg = self.rg(x);
        Ok(self.push(vec![c, r], out, Op::Transpose(x), rg))
    }

    // ---- reductions -----------------------------------------------------

    pub fn sum(&mut self, x: Var) -> Var {
        let s: f64 = self.value(x).iter().sum();
        let rg = self.rg(x);
        self.push(vec![1], vec![s], Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let s = v.iter().sum::<f64>() / v.len() as f64;
        let rg = self.rg(x);
        self.push(vec![1], vec![s], Op::Mean(x), rg)
    }

    fn axis_layout(&self, x: Var, axis: usize) -> Result<(usize, usize, usize, Vec<usize>)> {
        let s = self.shape(x);
        if axis >= s.len() {
            return Err(PwiError::invalid(format!("axis {axis} out of range for {s:?}")));
        }
        let outer = numel(&s[..axis]);
        let inner = numel(&s[axis + 1..]);
        let mut out_shape: Vec<usize> = s[..axis].iter().chain(&s[axis + 1..]).copied().collect();
        if out_shape.is_empty() {
            out_shape.push(1);
        }
        Ok((outer, s[axis], inner, out_shape))
    }

    /// Maximum along `axis`; backward routes to the lowest-index maximum.
    pub fn max_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let (outer, len, inner, out_shape) = self.axis_layout(x, axis)?;
        let xv = self.value(x);
        let mut out = Vec::with_capacity(outer * inner);
        let mut argmax = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            for i in 0..inner {
                let mut best = o * len * inner + i;
                for k in 1..len {
                    let idx = (o * len + k) * inner + i;
                    if xv[idx] > xv[best] {
                        best = idx;
                    }
                }
                out.push(xv[best]);
                argmax.push(best);
            }
        }
        let rg = self.rg(x);
        Ok(self.push(out_shape, out, Op::MaxAxis { x, argmax }, rg))
    }

    pub fn mean_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let (outer, len, inner, out_shape) = self.axis_layout(x, axis)?;
        let xv = self.value(x);
        let mut out = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            for i in 0..inner {
                let s: f64 = (0..len).map(|k| xv[(o * len + k) * inner + i]).sum();
                out.push(s / len as f64);
            }
        }
        let rg = self.rg(x);
        Ok(self.push(out_shape, out, Op::MeanAxis { x, axis }, rg))
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Var {
        let shape = self.shape(x).to_vec();
        let n = *shape.last().unwrap();
        let mut out = self.value(x).to_vec();
        for row in out.chunks_mut(n) {
            softmax_in_place(row);
        }
        let rg = self.rg(x);
        self.push(shape, out, Op::Softmax(x), rg)
    }

    /// `-log softmax(logits)[class]` for a logit vector.
    pub fn cross_entropy(&mut self, logits: Var, class: usize) -> Result<Var> {
        let s = self.shape(logits).to_vec();
        if s.len() != 1 {
            return Err(PwiError::shape("cross_entropy", &s, &[]));
        }
        if class >= s[0] {
            return Err(PwiError::invalid(format!(
                "cross_entropy class {class} out of range for {} logits",
                s[0]
            )));
        }
        let xv = self.value(logits);
        let max = xv.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + xv.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let loss = lse - xv[class];
        let mut probs = xv.to_vec();
        softmax_in_place(&mut probs);
        let rg = self.rg(logits);
        Ok(self.push(
            vec![1],
            vec![loss.max(0.0)],
            Op::CrossEntropy {
                x: logits,
                probs,
                class,
            },
            rg,
        ))
    }

    // ---- lookups and convolutions --------------------------------------

    /// Rows `ids` of a `[V × d]` table as a `[len(ids) × d]` matrix.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let s = self.shape(table).to_vec();
        if s.len() != 2 || ids.is_empty() {
            return Err(PwiError::shape("gather_rows", &s, &[ids.len()]));
        }
        let d = s[1];
        let tv = self.value(table);
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= s[0] {
                return Err(PwiError::invalid(format!("row {id} out of range for table {s:?}")));
            }
            out.extend_from_slice(&tv[id * d..(id + 1) * d]);
        }
        let rg = self.rg(table);
        Ok(self.push(
            vec![ids.len(), d],
            out,
            Op::GatherRows {
                table,
                ids: ids.to_vec(),
            },
            rg,
        ))
    }

    /// Valid 1-d convolution of a `[d × k]` sequence with a `[q × d × l]`
    /// filter bank plus per-filter bias `[q]`, giving `[q × (k−l+1)]`
    /// pre-activations (Frobenius inner product per window).
    pub fn conv1d_bank(&mut self, seq: Var, w: Var, b: Var) -> Result<Var> {
        let (ss, ws, bs) = (
            self.shape(seq).to_vec(),
            self.shape(w).to_vec(),
            self.shape(b).to_vec(),
        );
        if ss.len() != 2 || ws.len() != 3 || ws[1] != ss[0] || bs != [ws[0]] {
            return Err(PwiError::shape("conv1d", &ss, &ws));
        }
        let (d, k, q, l) = (ss[0], ss[1], ws[0], ws[2]);
        if l > k {
            return Err(PwiError::invalid(format!(
                "conv1d filter width {l} exceeds sequence length {k}; pad the sequence"
            )));
        }
        let out_len = k - l + 1;
        let (sv, wv, bv) = (self.value(seq), self.value(w), self.value(b));
        let mut out = vec![0.0; q * out_len];
        for f in 0..q {
            for j in 0..out_len {
                let mut acc = bv[f];
                for c in 0..d {
                    let wrow = &wv[(f * d + c) * l..(f * d + c + 1) * l];
                    let srow = &sv[c * k + j..c * k + j + l];
                    acc += wrow.iter().zip(srow).map(|(a, b)| a * b).sum::<f64>();
                }
                out[f * out_len + j] = acc;
            }
        }
        let rg = self.rg(seq) || self.rg(w) || self.rg(b);
        Ok(self.push(vec![q, out_len], out, Op::Conv1d { seq, w, b }, rg))
    }

    /// `tanh(⟨seq[:, j..j+l], filter⟩ + bias)` for a single `[d × l]` filter and
    /// one-element bias; output length `k − l + 1`.
    pub fn conv1d(&mut self, seq: Var, filter: Var, bias: Var) -> Result<Var> {
        let fs = self.shape(filter).to_vec();
        if fs.len() != 2 {
            return Err(PwiError::shape("conv1d", self.shape(seq), &fs));
        }
        let w = self.reshape(filter, &[1, fs[0], fs[1]])?;
        let pre = self.conv1d_bank(seq, w, bias)?;
        let n = self.shape(pre)[1];
        let flat = self.reshape(pre, &[n])?;
        Ok(self.tanh(flat))
    }

    /// Same-padded 2-d convolution: `[c × h × w]` input, `[o × c × kh × kw]`
    /// kernel with odd sides, `[o]` bias.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws, bs) = (
            self.shape(x).to_vec(),
            self.shape(w).to_vec(),
            self.shape(b).to_vec(),
        );
        if xs.len() != 3
            || ws.len() != 4
            || ws[1] != xs[0]
            || bs != [ws[0]]
            || ws[2] % 2 == 0
            || ws[3] % 2 == 0
        {
            return Err(PwiError::shape("conv2d", &xs, &ws));
        }
        let (c, h, wd) = (xs[0], xs[1], xs[2]);
        let (o, kh, kw) = (ws[0], ws[2], ws[3]);
        let (ph, pw) = (kh / 2, kw / 2);
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        let mut out = vec![0.0; o * h * wd];
        for oc in 0..o {
            let plane = &mut out[oc * h * wd..(oc + 1) * h * wd];
            plane.iter_mut().for_each(|v| *v = bv[oc]);
            for ic in 0..c {
                let src = &xv[ic * h * wd..(ic + 1) * h * wd];
                for ky in 0..kh {
                    for kx in 0..kw {
                        let wt = wv[((oc * c + ic) * kh + ky) * kw + kx];
                        if wt == 0.0 {
                            continue;
                        }
                        for y in 0..h {
                            let sy = y + ky;
                            if sy < ph || sy - ph >= h {
                                continue;
                            }
                            let sy = sy - ph;
                            let x_lo = pw.saturating_sub(kx);
                            let x_hi = (wd + pw).saturating_sub(kx).min(wd);
                            for xx in x_lo..x_hi {
                                plane[y * wd + xx] += wt * src[sy * wd + xx + kx - pw];
                            }
                        }
                    }
                }
            }
        }
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        Ok(self.push(vec![o, h, wd], out, Op::Conv2d { x, w, b }, rg))
    }

    /// 2×2 max pooling with stride 2 (floor on odd sides).
    pub fn max_pool2d(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 3 || s[1] < 2 || s[2] < 2 {
            return Err(PwiError::shape("max_pool2d", &s, &[2, 2]));
        }
        let (c, h, w) = (s[0], s[1], s[2]);
        let (oh, ow) = (h / 2, w / 2);
        let xv = self.value(x);
        let mut out = Vec::with_capacity(c * oh * ow);
        let mut argmax = Vec::with_capacity(c * oh * ow);
        for ch in 0..c {
            for y in 0..oh {
                for xx in 0..ow {
                    let mut best = (ch * h + 2 * y) * w + 2 * xx;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = (ch * h + 2 * y + dy) * w + 2 * xx + dx;
                        if xv[idx] > xv[best] {
                            best = idx;
                        }
                    }
                    out.push(xv[best]);
                    argmax.push(best);
                }
            }
        }
        let rg = self.rg(x);
        Ok(self.push(vec![c, oh, ow], out, Op::MaxPool2d { x, argmax }, rg))
    }

    /// Resizes `[c × h × w]` to `[c × out_h × out_w]`: zero padding at the
    /// bottom/right on short sides, centered crop on long sides.
    pub fn pad_crop(&mut self, x: Var, out_h: usize, out_w: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 3 {
            return Err(PwiError::shape("pad_crop", &s, &[out_h, out_w]));
        }
        let (c, h, w) = (s[0], s[1], s[2]);
        let off_h = h.saturating_sub(out_h) / 2;
        let off_w = w.saturating_sub(out_w) / 2;
        let xv = self.value(x);
        let mut out = vec![0.0; c * out_h * out_w];
        for ch in 0..c {
            for y in 0..out_h.min(h - off_h) {
                for xx in 0..out_w.min(w - off_w) {
                    out[(ch * out_h + y) * out_w + xx] = xv[(ch * h + y + off_h) * w + xx + off_w];
                }
            }
        }
        let rg = self.rg(x);
        Ok(self.push(vec![c, out_h, out_w], out, Op::PadCrop { x, off_h, off_w }, rg))
    }

    // ---- pairwise similarities -----------------------------------------

    fn pair_dims(&self, op: &'static str, a: Var, b: Var) -> Result<(usize, usize, usize)> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[1] {
            return Err(PwiError::shape(op, sa, sb));
        }
        Ok((sa[0], sb[0], sa[1]))
    }

    /// `out[i,j] = a_i · b_j` for `a: [m × h]`, `b: [n × h]`.
    pub fn pairwise_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, n, h) = self.pair_dims("pairwise_dot", a, b)?;
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[i * n + j] = dot(&av[i * h..(i + 1) * h], &bv[j * h..(j + 1) * h]);
            }
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(vec![m, n], out, Op::PairwiseDot(a, b), rg))
    }

    /// Cosine similarity of every row pair; 0 when either row is (near) zero.
    pub fn pairwise_cos(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, n, h) = self.pair_dims("pairwise_cos", a, b)?;
        let (av, bv) = (self.value(a), self.value(b));
        let na: Vec<f64> = av.chunks(h).map(norm).collect();
        let nb: Vec<f64> = bv.chunks(h).map(norm).collect();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let denom = na[i] * nb[j];
                if denom > NORM_FLOOR {
                    let c = dot(&av[i * h..(i + 1) * h], &bv[j * h..(j + 1) * h]) / denom;
                    out[i * n + j] = c.clamp(-1.0, 1.0);
                }
            }
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(vec![m, n], out, Op::PairwiseCos(a, b), rg))
    }

    /// Euclidean (not squared) distance of every row pair.
    pub fn pairwise_l2(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, n, h) = self.pair_dims("pairwise_l2", a, b)?;
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let ai = &av[i * h..(i + 1) * h];
                let bj = &bv[j * h..(j + 1) * h];
                out[i * n + j] = ai
                    .iter()
                    .zip(bj)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
            }
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(vec![m, n], out, Op::PairwiseL2(a, b), rg))
    }

    // ---- backward -------------------------------------------------------

    /// Reverse sweep from a one-element `loss`.
    ///
    /// Leaf gradients accumulate across calls on the same graph; parameter
    /// gradients of this call are returned (zeros for bound but unreached
    /// trainable parameters).
    pub fn backward(&mut self, loss: Var) -> Result<ParamGrads> {
        if numel(self.shape(loss)) != 1 {
            return Err(PwiError::invalid(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        if self.rg(loss) {
            grads[loss.0] = Some(vec![1.0]);
        }
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if matches!(self.nodes[i].op, Op::Input | Op::Param(_)) {
                grads[i] = Some(g);
                continue;
            }
            self.backprop_node(i, &g, &mut grads);
        }

        let mut out = ParamGrads::default();
        for (i, g) in grads.into_iter().enumerate() {
            let Some(g) = g else { continue };
            match self.nodes[i].op {
                Op::Param(id) => {
                    let acc = self.leaf_grads.entry(i).or_insert_with(|| vec![0.0; g.len()]);
                    acc.iter_mut().zip(&g).for_each(|(a, v)| *a += v);
                    out.insert(id, g);
                }
                Op::Input => {
                    let acc = self.leaf_grads.entry(i).or_insert_with(|| vec![0.0; g.len()]);
                    acc.iter_mut().zip(&g).for_each(|(a, v)| *a += v);
                }
                _ => {}
            }
        }
        for (&id, &v) in &self.bound {
            if self.nodes[v.0].requires_grad && out.get(id).is_none() {
                out.insert(id, vec![0.0; numel(&self.nodes[v.0].shape)]);
            }
        }
        Ok(out)
    }

    fn backprop_node(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        macro_rules! with_grad {
            ($v:expr, |$buf:ident| $body:block) => {
                if let Some($buf) = grad_slot(grads, nodes, $v) {
                    $body
                }
            };
        }
        let out_val = match &nodes[i].storage {
            Storage::Owned(d) => d.as_slice(),
            Storage::Param(_) => unreachable!(),
        };
        match &nodes[i].op {
            Op::Input | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (sa, sb) = (&nodes[a.0].shape, &nodes[b.0].shape);
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                let (av, bv) = (self.value(*a), self.value(*b));
                with_grad!(*a, |da| {
                    for r in 0..m {
                        for p in 0..k {
                            da[r * k + p] += dot(&g[r * n..(r + 1) * n], &bv[p * n..(p + 1) * n]);
                        }
                    }
                });
                with_grad!(*b, |db| {
                    for r in 0..m {
                        for p in 0..k {
                            let x = av[r * k + p];
                            for j in 0..n {
                                db[p * n + j] += x * g[r * n + j];
                            }
                        }
                    }
                });
            }
            Op::MatVec(w, x) => {
                let k = nodes[w.0].shape[1];
                let (wv, xv) = (self.value(*w), self.value(*x));
                with_grad!(*w, |dw| {
                    for (r, &gr) in g.iter().enumerate() {
                        if gr == 0.0 {
                            continue;
                        }
                        for (d, &xx) in dw[r * k..(r + 1) * k].iter_mut().zip(xv) {
                            *d += gr * xx;
                        }
                    }
                });
                with_grad!(*x, |dx| {
                    for (r, &gr) in g.iter().enumerate() {
                        for (d, &ww) in dx.iter_mut().zip(&wv[r * k..(r + 1) * k]) {
                            *d += gr * ww;
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                with_grad!(*a, |da| { add_assign(da, g) });
                with_grad!(*b, |db| { add_assign(db, g) });
            }
            Op::Sub(a, b) => {
                with_grad!(*a, |da| { add_assign(da, g) });
                with_grad!(*b, |db| {
                    db.iter_mut().zip(g).for_each(|(d, v)| *d -= v);
                });
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                with_grad!(*a, |da| {
                    for ((d, gv), y) in da.iter_mut().zip(g).zip(bv) {
                        *d += gv * y;
                    }
                });
                with_grad!(*b, |db| {
                    for ((d, gv), x) in db.iter_mut().zip(g).zip(av) {
                        *d += gv * x;
                    }
                });
            }
            Op::AddScalar(x, s) => {
                with_grad!(*x, |dx| { add_assign(dx, g) });
                with_grad!(*s, |ds| { ds[0] += g.iter().sum::<f64>() });
            }
            Op::Affine(x, scale) => {
                with_grad!(*x, |dx| {
                    dx.iter_mut().zip(g).for_each(|(d, v)| *d += scale * v);
                });
            }
            Op::Tanh(x) => {
                with_grad!(*x, |dx| {
                    for ((d, gv), y) in dx.iter_mut().zip(g).zip(out_val) {
                        *d += gv * (1.0 - y * y);
                    }
                });
            }
            Op::Sigmoid(x) => {
                with_grad!(*x, |dx| {
                    for ((d, gv), y) in dx.iter_mut().zip(g).zip(out_val) {
                        *d += gv * y * (1.0 - y);
                    }
                });
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for p in parts {
                    let n = numel(&nodes[p.0].shape);
                    with_grad!(*p, |dp| { add_assign(dp, &g[off..off + n]) });
                    off += n;
                }
            }
            Op::Slice { x, start } => {
                let row = numel(&nodes[x.0].shape[1..]);
                with_grad!(*x, |dx| {
                    add_assign(&mut dx[start * row..start * row + g.len()], g)
                });
            }
            Op::Reshape(x) => {
                with_grad!(*x, |dx| { add_assign(dx, g) });
            }
            Op::Transpose(x) => {
                let s = &nodes[x.0].shape;
                let (r, c) = (s[0], s[1]);
                with_grad!(*x, |dx| {
                    for a in 0..r {
                        for b in 0..c {
                            dx[a * c + b] += g[b * r + a];
                        }
                    }
                });
            }
            Op::Sum(x) => {
                with_grad!(*x, |dx| { dx.iter_mut().for_each(|d| *d += g[0]) });
            }
            Op::Mean(x) => {
                with_grad!(*x, |dx| {
                    let n = dx.len() as f64;
                    dx.iter_mut().for_each(|d| *d += g[0] / n)
                });
            }
            Op::MaxAxis { x, argmax } => {
                with_grad!(*x, |dx| {
                    for (&src, gv) in argmax.iter().zip(g) {
                        dx[src] += gv;
                    }
                });
            }
            Op::MeanAxis { x, axis } => {
                let s = &nodes[x.0].shape;
                let outer = numel(&s[..*axis]);
                let len = s[*axis];
                let inner = numel(&s[axis + 1..]);
                with_grad!(*x, |dx| {
                    for o in 0..outer {
                        for ii in 0..inner {
                            let gv = g[o * inner + ii] / len as f64;
                            for k in 0..len {
                                dx[(o * len + k) * inner + ii] += gv;
                            }
                        }
                    }
                });
            }
            Op::Softmax(x) => {
                let n = *nodes[x.0].shape.last().unwrap();
                with_grad!(*x, |dx| {
                    for ((drow, grow), yrow) in
                        dx.chunks_mut(n).zip(g.chunks(n)).zip(out_val.chunks(n))
                    {
                        let s = dot(grow, yrow);
                        for ((d, gv), y) in drow.iter_mut().zip(grow).zip(yrow) {
                            *d += y * (gv - s);
                        }
                    }
                });
            }
            Op::CrossEntropy { x, probs, class } => {
                with_grad!(*x, |dx| {
                    for (k, (d, p)) in dx.iter_mut().zip(probs).enumerate() {
                        let t = if k == *class { 1.0 } else { 0.0 };
                        *d += g[0] * (p - t);
                    }
                });
            }
            Op::GatherRows { table, ids } => {
                let d = nodes[table.0].shape[1];
                with_grad!(*table, |dt| {
                    for (r, &id) in ids.iter().enumerate() {
                        add_assign(&mut dt[id * d..(id + 1) * d], &g[r * d..(r + 1) * d]);
                    }
                });
            }
            Op::Conv1d { seq, w, b } => {
                let (ss, ws) = (&nodes[seq.0].shape, &nodes[w.0].shape);
                let (d, k, q, l) = (ss[0], ss[1], ws[0], ws[2]);
                let out_len = k - l + 1;
                let (sv, wv) = (self.value(*seq), self.value(*w));
                with_grad!(*w, |dw| {
                    for f in 0..q {
                        for c in 0..d {
                            for t in 0..l {
                                let mut s = 0.0;
                                for j in 0..out_len {
                                    s += g[f * out_len + j] * sv[c * k + j + t];
                                }
                                dw[(f * d + c) * l + t] += s;
                            }
                        }
                    }
                });
                with_grad!(*seq, |ds| {
                    for f in 0..q {
                        for j in 0..out_len {
                            let gv = g[f * out_len + j];
                            if gv == 0.0 {
                                continue;
                            }
                            for c in 0..d {
                                for t in 0..l {
                                    ds[c * k + j + t] += gv * wv[(f * d + c) * l + t];
                                }
                            }
                        }
                    }
                });
                with_grad!(*b, |db| {
                    for f in 0..q {
                        db[f] += g[f * out_len..(f + 1) * out_len].iter().sum::<f64>();
                    }
                });
            }
            Op::Conv2d { x, w, b } => {
                let (xs, ws) = (&nodes[x.0].shape, &nodes[w.0].shape);
                let (c, h, wd) = (xs[0], xs[1], xs[2]);
                let (o, kh, kw) = (ws[0], ws[2], ws[3]);
                let (ph, pw) = (kh / 2, kw / 2);
                let (xv, wv) = (self.value(*x), self.value(*w));
                let want_x = nodes[x.0].requires_grad;
                let want_w = nodes[w.0].requires_grad;
                let mut dx_local = if want_x { vec![0.0; c * h * wd] } else { Vec::new() };
                let mut dw_local = if want_w { vec![0.0; o * c * kh * kw] } else { Vec::new() };
                for oc in 0..o {
                    let gplane = &g[oc * h * wd..(oc + 1) * h * wd];
                    for ic in 0..c {
                        let src = &xv[ic * h * wd..(ic + 1) * h * wd];
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let widx = ((oc * c + ic) * kh + ky) * kw + kx;
                                let wt = wv[widx];
                                let mut wsum = 0.0;
                                let x_lo = pw.saturating_sub(kx);
                                let x_hi = (wd + pw).saturating_sub(kx).min(wd);
                                for y in 0..h {
                                    let sy = y + ky;
                                    if sy < ph || sy - ph >= h {
                                        continue;
                                    }
                                    let sy = sy - ph;
                                    for xx in x_lo..x_hi {
                                        let gv = gplane[y * wd + xx];
                                        let si = sy * wd + xx + kx - pw;
                                        if want_w {
                                            wsum += gv * src[si];
                                        }
                                        if want_x {
                                            dx_local[ic * h * wd + si] += gv * wt;
                                        }
                                    }
                                }
                                if want_w {
                                    dw_local[widx] += wsum;
                                }
                            }
                        }
                    }
                }
                with_grad!(*x, |dx| { add_assign(dx, &dx_local) });
                with_grad!(*w, |dw| { add_assign(dw, &dw_local) });
                with_grad!(*b, |db| {
                    for oc in 0..o {
                        db[oc] += g[oc * h * wd..(oc + 1) * h * wd].iter().sum::<f64>();
                    }
                });
            }
            Op::MaxPool2d { x, argmax } => {
                with_grad!(*x, |dx| {
                    for (&src, gv) in argmax.iter().zip(g) {
                        dx[src] += gv;
                    }
                });
            }
            Op::PadCrop { x, off_h, off_w } => {
                let s = &nodes[x.0].shape;
                let (c, h, w) = (s[0], s[1], s[2]);
                let os = &nodes[i].shape;
                let (oh, ow) = (os[1], os[2]);
                with_grad!(*x, |dx| {
                    for ch in 0..c {
                        for y in 0..oh.min(h - off_h) {
                            for xx in 0..ow.min(w - off_w) {
                                dx[(ch * h + y + off_h) * w + xx + off_w] +=
                                    g[(ch * oh + y) * ow + xx];
                            }
                        }
                    }
                });
            }
            Op::PairwiseDot(a, b) => {
                let (m, hh) = (nodes[a.0].shape[0], nodes[a.0].shape[1]);
                let n = nodes[b.0].shape[0];
                let (av, bv) = (self.value(*a), self.value(*b));
                with_grad!(*a, |da| {
                    for r in 0..m {
                        for j in 0..n {
                            let gv = g[r * n + j];
                            for t in 0..hh {
                                da[r * hh + t] += gv * bv[j * hh + t];
                            }
                        }
                    }
                });
                with_grad!(*b, |db| {
                    for r in 0..m {
                        for j in 0..n {
                            let gv = g[r * n + j];
                            for t in 0..hh {
                                db[j * hh + t] += gv * av[r * hh + t];
                            }
                        }
                    }
                });
            }
            Op::PairwiseCos(a, b) => {
                let (m, hh) = (nodes[a.0].shape[0], nodes[a.0].shape[1]);
                let n = nodes[b.0].shape[0];
                let (av, bv) = (self.value(*a), self.value(*b));
                let na: Vec<f64> = av.chunks(hh).map(norm).collect();
                let nb: Vec<f64> = bv.chunks(hh).map(norm).collect();
                with_grad!(*a, |da| {
                    for r in 0..m {
                        for j in 0..n {
                            let denom = na[r] * nb[j];
                            if denom <= NORM_FLOOR {
                                continue;
                            }
                            let gv = g[r * n + j];
                            let cij = out_val[r * n + j];
                            for t in 0..hh {
                                da[r * hh + t] += gv
                                    * (bv[j * hh + t] / denom - cij * av[r * hh + t] / (na[r] * na[r]));
                            }
                        }
                    }
                });
                with_grad!(*b, |db| {
                    for r in 0..m {
                        for j in 0..n {
                            let denom = na[r] * nb[j];
                            if denom <= NORM_FLOOR {
                                continue;
                            }
                            let gv = g[r * n + j];
                            let cij = out_val[r * n + j];
                            for t in 0..hh {
                                db[j * hh + t] += gv
                                    * (av[r * hh + t] / denom - cij * bv[j * hh + t] / (nb[j] * nb[j]));
                            }
                        }
                    }
                });
            }
            Op::PairwiseL2(a, b) => {
                let (m, hh) = (nodes[a.0].shape[0], nodes[a.0].shape[1]);
                let n = nodes[b.0].shape[0];
                let (av, bv) = (self.value(*a), self.value(*b));
                let mut ga = vec![0.0; m * hh];
                let mut gb = vec![0.0; n * hh];
                for r in 0..m {
                    for j in 0..n {
                        let dist = out_val[r * n + j];
                        if dist == 0.0 {
                            continue;
                        }
                        let s = g[r * n + j] / dist;
                        for t in 0..hh {
                            let diff = av[r * hh + t] - bv[j * hh + t];
                            ga[r * hh + t] += s * diff;
                            gb[j * hh + t] -= s * diff;
                        }
                    }
                }
                with_grad!(*a, |da| { add_assign(da, &ga) });
                with_grad!(*b, |db| { add_assign(db, &gb) });
            }
        }
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    row.iter_mut().for_each(|v| *v /= total);
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn grad_slot<'g>(grads: &'g mut [Option<Vec<f64>>], nodes: &[Node], v: Var) -> Option<&'g mut Vec<f64>> {
    if !nodes[v.0].requires_grad {
        return None;
    }
    let n = numel(&nodes[v.0].shape);
    Some(grads[v.0].get_or_insert_with(|| vec![0.0; n]))
}

fn add_assign(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}
