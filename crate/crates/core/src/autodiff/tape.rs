//! Append-only tape for reverse-mode differentiation.
//!
//! Every operation pushes a node holding its forward value and what the
//! backward pass needs. Node ids are insertion order, which is already a
//! topological order, so [`Tape::backward`] is a single reverse sweep.
//!
//! Besides the dense primitives there are a few fused graph kernels
//! (indexed sums, segment reductions, sparse masked attention) that keep the
//! message-passing models from materializing huge intermediate tensors.

use std::rc::Rc;

use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

/// Sentinel index: "no row" for gathers and "skip" for segment reductions.
pub const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    /// Reduce over rows, keeping one row.
    Rows,
    /// Reduce over columns, keeping one column.
    Cols,
}

/// Compressed sparse rows: neighbors of row `i` are `cols[offsets[i]..offsets[i + 1]]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Csr {
    pub offsets: Vec<usize>,
    pub cols: Vec<u32>,
}

impl Csr {
    pub fn from_lists(lists: &[Vec<usize>]) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        offsets.push(0);
        let mut cols = Vec::new();
        for l in lists {
            cols.extend(l.iter().map(|&c| c as u32));
            offsets.push(cols.len());
        }
        Self { offsets, cols }
    }

    pub fn rows(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.cols[self.offsets[i]..self.offsets[i + 1]]
    }
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    MulCol(Var, Var),
    Affine(Var, f64),
    Concat { parts: Vec<Var>, axis: Axis },
    Slice { x: Var, axis: Axis, start: usize },
    Relu(Var),
    Sigmoid(Var),
    SoftmaxRows(Var),
    LogSumExpRows(Var),
    MaxReduce { x: Var, argmax: Vec<usize> },
    MeanReduce { x: Var, axis: Option<Axis> },
    MaskedFill { x: Var, mask: Rc<[bool]> },
    Gather { x: Var, index: Rc<[u32]> },
    IndexedSum { terms: Vec<(Var, Option<Rc<[u32]>>)> },
    SegmentMax { x: Var, argmax: Vec<u32> },
    SegmentMean { x: Var, segment: Rc<[u32]>, counts: Vec<usize> },
    SegmentLogSumExp { x: Var, offsets: Rc<[usize]> },
    LayerNorm { x: Var, rstd: Vec<f64> },
    BceWithLogits { x: Var, targets: Rc<[f64]> },
    Attention(Box<AttentionSaved>),
}

struct AttentionSaved {
    q: Var,
    k: Var,
    v: Var,
    heads: usize,
    csr: Rc<Csr>,
    /// `weights[h * nnz + p]` for head `h` and stored pair `p`.
    weights: Vec<f64>,
}

struct Node {
    value: Tensor,
    requires_grad: bool,
    op: Op,
}

/// Recorded computation. Single-threaded; build one per forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one backward pass, indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of a leaf that requires grad; `None` for constants.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, parents: &[Var]) -> Var {
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node {
            value,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    /// Leaf excluded from differentiation.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    fn binary_same(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(name, ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(ta.rows(), ta.cols(), data)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != tb.rows() {
            return Err(shape_err("matmul", ta, tb));
        }
        let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
        let mut out = Tensor::zeros(m, n);
        gemm(m, k, n, ta.data(), false, tb.data(), false, 0.0, out.data_mut());
        Ok(self.push(out, Op::MatMul(a, b), &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary_same("add", a, b, |x, y| x + y)?;
        Ok(self.push(out, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary_same("sub", a, b, |x, y| x - y)?;
        Ok(self.push(out, Op::Sub(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary_same("mul", a, b, |x, y| x * y)?;
        Ok(self.push(out, Op::Mul(a, b), &[a, b]))
    }

    /// `x + bias` with a `1 x c` bias broadcast over rows.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(bias));
        if tb.rows() != 1 || tb.cols() != tx.cols() {
            return Err(shape_err("add_row", tx, tb));
        }
        let c = tx.cols();
        let mut out = tx.clone();
        for row in out.data_mut().chunks_mut(c.max(1)) {
            row.iter_mut().zip(tb.data()).for_each(|(o, b)| *o += b);
        }
        Ok(self.push(out, Op::AddRow(x, bias), &[x, bias]))
    }

    /// `x * scale` with a `1 x c` scale broadcast over rows.
    pub fn mul_row(&mut self, x: Var, scale: Var) -> Result<Var> {
        let (tx, ts) = (self.value(x), self.value(scale));
        if ts.rows() != 1 || ts.cols() != tx.cols() {
            return Err(shape_err("mul_row", tx, ts));
        }
        let c = tx.cols();
        let mut out = tx.clone();
        for row in out.data_mut().chunks_mut(c.max(1)) {
            row.iter_mut().zip(ts.data()).for_each(|(o, s)| *o *= s);
        }
        Ok(self.push(out, Op::MulRow(x, scale), &[x, scale]))
    }

    /// `x * gate` with an `r x 1` gate broadcast over columns.
    pub fn mul_col(&mut self, x: Var, gate: Var) -> Result<Var> {
        let (tx, tg) = (self.value(x), self.value(gate));
        if tg.cols() != 1 || tg.rows() != tx.rows() {
            return Err(shape_err("mul_col", tx, tg));
        }
        let c = tx.cols();
        let mut out = tx.clone();
        for (row, g) in out.data_mut().chunks_mut(c.max(1)).zip(tg.data()) {
            row.iter_mut().for_each(|o| *o *= g);
        }
        Ok(self.push(out, Op::MulCol(x, gate), &[x, gate]))
    }

    /// `scale * x + shift`, elementwise.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        let tx = self.value(x);
        let data = tx.data().iter().map(|&v| scale * v + shift).collect();
        let out = Tensor::new(tx.rows(), tx.cols(), data).expect("same shape");
        self.push(out, Op::Affine(x, scale), &[x])
    }

    pub fn concat(&mut self, parts: &[Var], axis: Axis) -> Result<Var> {
        let first = self
            .value(*parts.first().ok_or_else(|| Error::Parameter("concat of nothing".into()))?)
            .clone();
        let out = match axis {
            Axis::Cols => {
                let rows = first.rows();
                let mut cols = 0;
                for &p in parts {
                    let t = self.value(p);
                    if t.rows() != rows {
                        return Err(shape_err("concat", &first, t));
                    }
                    cols += t.cols();
                }
                let mut data = Vec::with_capacity(rows * cols);
                for r in 0..rows {
                    for &p in parts {
                        data.extend_from_slice(self.value(p).row(r));
                    }
                }
                Tensor::new(rows, cols, data)?
            }
            Axis::Rows => {
                let cols = first.cols();
                let mut data = Vec::new();
                let mut rows = 0;
                for &p in parts {
                    let t = self.value(p);
                    if t.cols() != cols {
                        return Err(shape_err("concat", &first, t));
                    }
                    rows += t.rows();
                    data.extend_from_slice(t.data());
                }
                Tensor::new(rows, cols, data)?
            }
        };
        Ok(self.push(out, Op::Concat { parts: parts.to_vec(), axis }, parts))
    }

    /// Rows or columns `start..end`.
    pub fn slice(&mut self, x: Var, axis: Axis, start: usize, end: usize) -> Result<Var> {
        let tx = self.value(x);
        let limit = match axis {
            Axis::Rows => tx.rows(),
            Axis::Cols => tx.cols(),
        };
        if start > end || end > limit {
            return Err(Error::Shape {
                op: "slice",
                lhs: tx.shape().to_vec(),
                rhs: vec![start, end],
            });
        }
        let out = match axis {
            Axis::Rows => {
                let c = tx.cols();
                Tensor::new(end - start, c, tx.data()[start * c..end * c].to_vec())?
            }
            Axis::Cols => {
                let mut data = Vec::with_capacity(tx.rows() * (end - start));
                for r in 0..tx.rows() {
                    data.extend_from_slice(&tx.row(r)[start..end]);
                }
                Tensor::new(tx.rows(), end - start, data)?
            }
        };
        Ok(self.push(out, Op::Slice { x, axis, start }, &[x]))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let tx = self.value(x);
        let data = tx.data().iter().map(|&v| v.max(0.0)).collect();
        let out = Tensor::new(tx.rows(), tx.cols(), data).expect("same shape");
        self.push(out, Op::Relu(x), &[x])
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let tx = self.value(x);
        let data = tx.data().iter().map(|&v| sigmoid(v)).collect();
        let out = Tensor::new(tx.rows(), tx.cols(), data).expect("same shape");
        self.push(out, Op::Sigmoid(x), &[x])
    }

    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let tx = self.value(x);
        let c = tx.cols().max(1);
        let mut out = tx.clone();
        for row in out.data_mut().chunks_mut(c) {
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for v in row.iter_mut() {
                *v = (*v - m).exp();
                z += *v;
            }
            row.iter_mut().for_each(|v| *v /= z);
        }
        self.push(out, Op::SoftmaxRows(x), &[x])
    }

    /// Row-wise `log(sum(exp(x)))`, giving an `r x 1` column.
    pub fn logsumexp_rows(&mut self, x: Var) -> Var {
        let tx = self.value(x);
        let c = tx.cols().max(1);
        let data = tx.data().chunks(c).map(logsumexp).collect();
        self.push(Tensor::column(data), Op::LogSumExpRows(x), &[x])
    }

    /// Max along `axis`. Gradient flows to the first index attaining the max.
    pub fn max_reduce(&mut self, x: Var, axis: Axis) -> Var {
        let tx = self.value(x);
        let (r, c) = (tx.rows(), tx.cols());
        let (out, argmax) = match axis {
            Axis::Cols => {
                let mut vals = Vec::with_capacity(r);
                let mut arg = Vec::with_capacity(r);
                for i in 0..r {
                    let row = tx.row(i);
                    let j = first_argmax(row.iter().copied());
                    vals.push(row[j]);
                    arg.push(i * c + j);
                }
                (Tensor::column(vals), arg)
            }
            Axis::Rows => {
                let mut vals = Vec::with_capacity(c);
                let mut arg = Vec::with_capacity(c);
                for j in 0..c {
                    let i = first_argmax((0..r).map(|i| tx.get(i, j)));
                    vals.push(tx.get(i, j));
                    arg.push(i * c + j);
                }
                (Tensor::row_vector(vals), arg)
            }
        };
        self.push(out, Op::MaxReduce { x, argmax }, &[x])
    }

    /// Mean over everything (`None`, giving `1 x 1`) or along one axis.
    pub fn mean_reduce(&mut self, x: Var, axis: Option<Axis>) -> Var {
        let tx = self.value(x);
        let (r, c) = (tx.rows(), tx.cols());
        let out = match axis {
            None => Tensor::scalar(tx.data().iter().sum::<f64>() / tx.len() as f64),
            Some(Axis::Cols) => Tensor::column(
                (0..r).map(|i| tx.row(i).iter().sum::<f64>() / c as f64).collect(),
            ),
            Some(Axis::Rows) => Tensor::row_vector(
                (0..c)
                    .map(|j| (0..r).map(|i| tx.get(i, j)).sum::<f64>() / r as f64)
                    .collect(),
            ),
        };
        self.push(out, Op::MeanReduce { x, axis }, &[x])
    }

    /// Entries where `mask` is true are replaced by `value` and receive no gradient.
    pub fn masked_fill(&mut self, x: Var, mask: Rc<[bool]>, value: f64) -> Result<Var> {
        let tx = self.value(x);
        if mask.len() != tx.len() {
            return Err(Error::Shape {
                op: "masked_fill",
                lhs: tx.shape().to_vec(),
                rhs: vec![mask.len()],
            });
        }
        let data = tx
            .data()
            .iter()
            .zip(mask.iter())
            .map(|(&v, &m)| if m { value } else { v })
            .collect();
        let out = Tensor::new(tx.rows(), tx.cols(), data)?;
        Ok(self.push(out, Op::MaskedFill { x, mask }, &[x]))
    }

    /// Row gather; [`NONE`] yields a zero row.
    pub fn gather_rows(&mut self, x: Var, index: Rc<[u32]>) -> Result<Var> {
        let tx = self.value(x);
        let c = tx.cols();
        let mut data = vec![0.0; index.len() * c];
        for (dst, &i) in data.chunks_mut(c.max(1)).zip(index.iter()) {
            if i != NONE {
                if i as usize >= tx.rows() {
                    return Err(Error::Shape {
                        op: "gather_rows",
                        lhs: tx.shape().to_vec(),
                        rhs: vec![i as usize],
                    });
                }
                dst.copy_from_slice(tx.row(i as usize));
            }
        }
        let out = Tensor::new(index.len(), c, data)?;
        Ok(self.push(out, Op::Gather { x, index }, &[x]))
    }

    /// `out[r] = sum_t x_t[index_t[r]]`, with `None` meaning the identity
    /// index and [`NONE`] entries contributing nothing. `rows` fixes the output height.
    pub fn indexed_sum(&mut self, rows: usize, terms: Vec<(Var, Option<Rc<[u32]>>)>) -> Result<Var> {
        let c = match terms.first() {
            Some(&(v, _)) => self.value(v).cols(),
            None => return Err(Error::Parameter("indexed_sum of nothing".into())),
        };
        let mut out = Tensor::zeros(rows, c);
        for (v, idx) in &terms {
            let t = self.value(*v);
            if t.cols() != c {
                return Err(shape_err("indexed_sum", self.value(terms[0].0), t));
            }
            match idx {
                None => {
                    if t.rows() != rows {
                        return Err(shape_err("indexed_sum", &out, t));
                    }
                    out.data_mut().iter_mut().zip(t.data()).for_each(|(o, x)| *o += x);
                }
                Some(idx) => {
                    if idx.len() != rows {
                        return Err(Error::Shape {
                            op: "indexed_sum",
                            lhs: vec![rows, c],
                            rhs: vec![idx.len()],
                        });
                    }
                    let tr = t.rows();
                    for (dst, &i) in out.data_mut().chunks_mut(c.max(1)).zip(idx.iter()) {
                        if i == NONE {
                            continue;
                        }
                        if i as usize >= tr {
                            return Err(Error::Shape {
                                op: "indexed_sum",
                                lhs: t.shape().to_vec(),
                                rhs: vec![i as usize],
                            });
                        }
                        dst.iter_mut().zip(t.row(i as usize)).for_each(|(o, x)| *o += x);
                    }
                }
            }
        }
        let parents: Vec<Var> = terms.iter().map(|t| t.0).collect();
        Ok(self.push(out, Op::IndexedSum { terms }, &parents))
    }

    /// Column-wise max of the rows sharing a segment id. Empty segments give
    /// zeros; [`NONE`] rows are skipped. Gradient goes to the first maximal row.
    pub fn segment_max(&mut self, x: Var, segment: &[u32], segments: usize) -> Result<Var> {
        let tx = self.value(x);
        if segment.len() != tx.rows() {
            return Err(Error::Shape {
                op: "segment_max",
                lhs: tx.shape().to_vec(),
                rhs: vec![segment.len()],
            });
        }
        let c = tx.cols();
        let mut out = Tensor::zeros(segments, c);
        let mut argmax = vec![NONE; segments * c];
        for (r, &s) in segment.iter().enumerate() {
            if s == NONE {
                continue;
            }
            let s = s as usize;
            if s >= segments {
                return Err(Error::Parameter(format!("segment id {s} >= {segments}")));
            }
            let row = tx.row(r);
            let dst = &mut out.data_mut()[s * c..(s + 1) * c];
            let arg = &mut argmax[s * c..(s + 1) * c];
            for j in 0..c {
                if arg[j] == NONE || row[j] > dst[j] {
                    dst[j] = row[j];
                    arg[j] = r as u32;
                }
            }
        }
        Ok(self.push(out, Op::SegmentMax { x, argmax }, &[x]))
    }

    /// Mean of the rows sharing a segment id; empty segments give zeros.
    pub fn segment_mean(&mut self, x: Var, segment: Rc<[u32]>, segments: usize) -> Result<Var> {
        let tx = self.value(x);
        if segment.len() != tx.rows() {
            return Err(Error::Shape {
                op: "segment_mean",
                lhs: tx.shape().to_vec(),
                rhs: vec![segment.len()],
            });
        }
        let c = tx.cols();
        let mut out = Tensor::zeros(segments, c);
        let mut counts = vec![0usize; segments];
        for (r, &s) in segment.iter().enumerate() {
            if s == NONE {
                continue;
            }
            let s = s as usize;
            if s >= segments {
                return Err(Error::Parameter(format!("segment id {s} >= {segments}")));
            }
            counts[s] += 1;
            let row = tx.row(r);
            out.data_mut()[s * c..(s + 1) * c]
                .iter_mut()
                .zip(row)
                .for_each(|(o, x)| *o += x);
        }
        for (s, &n) in counts.iter().enumerate() {
            if n > 0 {
                out.data_mut()[s * c..(s + 1) * c].iter_mut().for_each(|o| *o /= n as f64);
            }
        }
        Ok(self.push(out, Op::SegmentMean { x, segment, counts }, &[x]))
    }

    /// Log-sum-exp over contiguous runs of a column vector:
    /// segment `s` covers rows `offsets[s]..offsets[s + 1]`.
    pub fn segment_logsumexp(&mut self, x: Var, offsets: Rc<[usize]>) -> Result<Var> {
        let tx = self.value(x);
        if tx.cols() != 1 || offsets.last().copied() != Some(tx.rows()) {
            return Err(Error::Shape {
                op: "segment_logsumexp",
                lhs: tx.shape().to_vec(),
                rhs: vec![offsets.last().copied().unwrap_or(0)],
            });
        }
        let data = offsets
            .windows(2)
            .map(|w| logsumexp(&tx.data()[w[0]..w[1]]))
            .collect();
        Ok(self.push(Tensor::column(data), Op::SegmentLogSumExp { x, offsets }, &[x]))
    }

    /// Row-wise standardization `(x - mean) / sqrt(var + eps)` without affine terms.
    pub fn layer_norm_rows(&mut self, x: Var, eps: f64) -> Var {
        let tx = self.value(x);
        let c = tx.cols().max(1);
        let mut out = tx.clone();
        let mut rstd = Vec::with_capacity(tx.rows());
        for row in out.data_mut().chunks_mut(c) {
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let rs = 1.0 / (var + eps).sqrt();
            row.iter_mut().for_each(|v| *v = (*v - mean) * rs);
            rstd.push(rs);
        }
        self.push(out, Op::LayerNorm { x, rstd }, &[x])
    }

    /// Elementwise binary cross-entropy of logits `x` against `targets`.
    pub fn bce_with_logits(&mut self, x: Var, targets: Rc<[f64]>) -> Result<Var> {
        let tx = self.value(x);
        if targets.len() != tx.len() {
            return Err(Error::Shape {
                op: "bce_with_logits",
                lhs: tx.shape().to_vec(),
                rhs: vec![targets.len()],
            });
        }
        let data = tx
            .data()
            .iter()
            .zip(targets.iter())
            .map(|(&z, &y)| z.max(0.0) - z * y + (-z.abs()).exp().ln_1p())
            .collect();
        let out = Tensor::new(tx.rows(), tx.cols(), data)?;
        Ok(self.push(out, Op::BceWithLogits { x, targets }, &[x]))
    }

    /// Multi-head scaled dot-product attention restricted to a sparsity pattern.
    ///
    /// Query row `i` attends to the rows listed in `csr.row(i)`; everything else
    /// is masked out (logit -inf). `q`, `k`, `v` are `L x d` with `d` divisible
    /// by `heads`. Rows with no allowed keys produce zeros.
    pub fn masked_attention(&mut self, q: Var, k: Var, v: Var, heads: usize, csr: Rc<Csr>) -> Result<Var> {
        let (tq, tk, tv) = (self.value(q), self.value(k), self.value(v));
        if tq.shape() != tk.shape() || tq.shape() != tv.shape() {
            return Err(shape_err("masked_attention", tq, tk));
        }
        let (l, d) = (tq.rows(), tq.cols());
        if heads == 0 || d % heads != 0 || csr.rows() != l {
            return Err(Error::Shape {
                op: "masked_attention",
                lhs: vec![l, d],
                rhs: vec![csr.rows(), heads],
            });
        }
        let dk = d / heads;
        let scale = 1.0 / (dk as f64).sqrt();
        let nnz = csr.cols.len();
        let mut weights = vec![0.0; heads * nnz];
        let mut out = Tensor::zeros(l, d);
        for h in 0..heads {
            let lo = h * dk;
            for i in 0..l {
                let (a, b) = (csr.offsets[i], csr.offsets[i + 1]);
                if a == b {
                    continue;
                }
                let qi = &tq.row(i)[lo..lo + dk];
                let w = &mut weights[h * nnz + a..h * nnz + b];
                for (wp, &j) in w.iter_mut().zip(&csr.cols[a..b]) {
                    let kj = &tk.row(j as usize)[lo..lo + dk];
                    *wp = scale * qi.iter().zip(kj).map(|(x, y)| x * y).sum::<f64>();
                }
                let m = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for wp in w.iter_mut() {
                    *wp = (*wp - m).exp();
                    z += *wp;
                }
                w.iter_mut().for_each(|wp| *wp /= z);
                let oi = &mut out.data_mut()[i * d + lo..i * d + lo + dk];
                for (&wp, &j) in w.iter().zip(&csr.cols[a..b]) {
                    let vj = &tv.row(j as usize)[lo..lo + dk];
                    oi.iter_mut().zip(vj).for_each(|(o, x)| *o += wp * x);
                }
            }
        }
        let saved = AttentionSaved {
            q,
            k,
            v,
            heads,
            csr,
            weights,
        };
        Ok(self.push(out, Op::Attention(Box::new(saved)), &[q, k, v]))
    }

    /// Attention weights recorded by [`Self::masked_attention`], laid out as
    /// `weights[h * nnz + p]`.
    pub fn attention_weights(&self, v: Var) -> Option<&[f64]> {
        match &self.nodes[v.0].op {
            Op::Attention(s) => Some(&s.weights),
            _ => None,
        }
    }

    /// Backpropagates from the `1 x 1` node `out`.
    pub fn backward(&self, out: Var) -> Result<Gradients> {
        let shape = self.value(out).shape();
        if shape != [1, 1] {
            return Err(Error::Shape {
                op: "backward",
                lhs: shape.to_vec(),
                rhs: vec![1, 1],
            });
        }
        let mut grads: Vec<Option<Tensor>> = Vec::new();
        grads.resize_with(self.nodes.len(), || None);
        grads[out.0] = Some(Tensor::scalar(1.0));
        for i in (0..=out.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                grads[i] = None;
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            if let Op::Leaf = node.op {
                grads[i] = Some(g);
                continue;
            }
            self.backprop(node, &g, &mut grads);
        }
        Ok(Gradients { grads })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn backprop(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let y = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                if self.wants(*a) {
                    let buf = grad_buf(grads, *a, m, k);
                    gemm(m, n, k, g.data(), false, tb.data(), true, 1.0, buf);
                }
                if self.wants(*b) {
                    let buf = grad_buf(grads, *b, k, n);
                    gemm(k, m, n, ta.data(), true, g.data(), false, 1.0, buf);
                }
            }
            Op::Add(a, b) => {
                self.acc_map(grads, *a, g, |x| x);
                self.acc_map(grads, *b, g, |x| x);
            }
            Op::Sub(a, b) => {
                self.acc_map(grads, *a, g, |x| x);
                self.acc_map(grads, *b, g, |x| -x);
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                if self.wants(*a) {
                    let buf = grad_buf(grads, *a, ta.rows(), ta.cols());
                    for ((o, gg), x) in buf.iter_mut().zip(g.data()).zip(tb.data()) {
                        *o += gg * x;
                    }
                }
                if self.wants(*b) {
                    let buf = grad_buf(grads, *b, tb.rows(), tb.cols());
                    for ((o, gg), x) in buf.iter_mut().zip(g.data()).zip(ta.data()) {
                        *o += gg * x;
                    }
                }
            }
            Op::AddRow(x, bias) => {
                self.acc_map(grads, *x, g, |v| v);
                if self.wants(*bias) {
                    let c = g.cols();
                    let buf = grad_buf(grads, *bias, 1, c);
                    for row in g.data().chunks(c.max(1)) {
                        buf.iter_mut().zip(row).for_each(|(o, v)| *o += v);
                    }
                }
            }
            Op::MulRow(x, scale) => {
                let (tx, ts) = (self.value(*x), self.value(*scale));
                let c = tx.cols().max(1);
                if self.wants(*x) {
                    let buf = grad_buf(grads, *x, tx.rows(), tx.cols());
                    for (orow, grow) in buf.chunks_mut(c).zip(g.data().chunks(c)) {
                        for ((o, gg), s) in orow.iter_mut().zip(grow).zip(ts.data()) {
                            *o += gg * s;
                        }
                    }
                }
                if self.wants(*scale) {
                    let buf = grad_buf(grads, *scale, 1, tx.cols());
                    for (xrow, grow) in tx.data().chunks(c).zip(g.data().chunks(c)) {
                        for ((o, gg), xv) in buf.iter_mut().zip(grow).zip(xrow) {
                            *o += gg * xv;
                        }
                    }
                }
            }
            Op::MulCol(x, gate) => {
                let (tx, tg) = (self.value(*x), self.value(*gate));
                let c = tx.cols().max(1);
                if self.wants(*x) {
                    let buf = grad_buf(grads, *x, tx.rows(), tx.cols());
                    for ((orow, grow), s) in buf.chunks_mut(c).zip(g.data().chunks(c)).zip(tg.data()) {
                        orow.iter_mut().zip(grow).for_each(|(o, gg)| *o += gg * s);
                    }
                }
                if self.wants(*gate) {
                    let buf = grad_buf(grads, *gate, tg.rows(), 1);
                    for ((o, xrow), grow) in buf.iter_mut().zip(tx.data().chunks(c)).zip(g.data().chunks(c)) {
                        *o += xrow.iter().zip(grow).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
            }
            Op::Affine(x, scale) => {
                let s = *scale;
                self.acc_map(grads, *x, g, |v| s * v);
            }
            Op::Concat { parts, axis } => {
                let mut offset = 0;
                for &p in parts {
                    let tp = self.value(p);
                    let (pr, pc) = (tp.rows(), tp.cols());
                    if self.wants(p) {
                        let buf = grad_buf(grads, p, pr, pc);
                        match axis {
                            Axis::Cols => {
                                for r in 0..pr {
                                    let src = &g.row(r)[offset..offset + pc];
                                    buf[r * pc..(r + 1) * pc]
                                        .iter_mut()
                                        .zip(src)
                                        .for_each(|(o, v)| *o += v);
                                }
                            }
                            Axis::Rows => {
                                let src = &g.data()[offset * pc..(offset + pr) * pc];
                                buf.iter_mut().zip(src).for_each(|(o, v)| *o += v);
                            }
                        }
                    }
                    offset += match axis {
                        Axis::Cols => pc,
                        Axis::Rows => pr,
                    };
                }
            }
            Op::Slice { x, axis, start } => {
                if self.wants(*x) {
                    let tx = self.value(*x);
                    let c = tx.cols();
                    let buf = grad_buf(grads, *x, tx.rows(), c);
                    match axis {
                        Axis::Rows => {
                            buf[start * c..start * c + g.len()]
                                .iter_mut()
                                .zip(g.data())
                                .for_each(|(o, v)| *o += v);
                        }
                        Axis::Cols => {
                            let w = g.cols();
                            for r in 0..g.rows() {
                                buf[r * c + start..r * c + start + w]
                                    .iter_mut()
                                    .zip(g.row(r))
                                    .for_each(|(o, v)| *o += v);
                            }
                        }
                    }
                }
            }
            Op::Relu(x) => {
                if self.wants(*x) {
                    let buf = grad_buf(grads, *x, y.rows(), y.cols());
                    for ((o, gg), yy) in buf.iter_mut().zip(g.data()).zip(y.data()) {
                        if *yy > 0.0 {
                            *o += gg;
                        }
                    }
                }
            }
            Op::Sigmoid(x) => {
                if self.wants(*x) {
                    let buf = grad_buf(grads, *x, y.rows(), y.cols());
                    for ((o, gg), yy) in buf.iter_mut().zip(g.data()).zip(y.data()) {
                        *o += gg * yy * (1.0 - yy);
                    }
                }
            }
            Op::SoftmaxRows(x) => {
                if self.wants(*x) {
                    let c = y.cols().max(1);
                    let buf = grad_buf(grads, *x, y.rows(), y.cols());
                    for ((orow, grow), yrow) in buf.chunks_mut(c).zip(g.data().chunks(c)).zip(y.data().chunks(c)) {
                        let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                        for ((o, gg), yy) in orow.iter_mut().zip(grow).zip(yrow) {
                            *o += yy * (gg - dot);
                        }
                    }
                }
            }
            Op::LogSumExpRows(x) => {
                if self.wants(*x) {
                    let tx = self.value(*x);
                    let c = tx.cols().max(1);
                    let buf = grad_buf(grads, *x, tx.rows(), tx.cols());
                    for (r, (orow, xrow)) in buf.chunks_mut(c).zip(tx.data().chunks(c)).enumerate() {
                        let (gg, lse) = (g.data()[r], y.data()[r]);
                        for (o, xv) in orow.iter_mut().zip(xrow) {
                            *o += gg * (xv - lse).exp();
                        }
                    }
                }
            }
            Op::MaxReduce { x, argmax } => {
                if self.wants(*x) {
                    let tx = self.value(*x);
                    let buf = grad_buf(grads, *x, tx.rows(), tx.cols());
                    for (&flat, gg) in argmax.iter().zip(g.data()) {
                        buf[flat] += gg;
                    }
                }
            }
            Op::MeanReduce { x, axis } => {
                if self.wants(*x) {
                    let tx = self.value(*x);
                    let (r, c) = (tx.rows(), tx.cols());
                    let buf = grad_buf(grads, *x, r, c);
                    match axis {
                        None => {
                            let v = g.item() / (r * c) as f64;
                            buf.iter_mut().for_each(|o| *o += v);
                        }
                        Some(Axis::Cols) => {
                            for i in 0..r {
                                let v = g.data()[i] / c as f64;
                                buf[i * c..(i + 1) * c].iter_mut().for_each(|o| *o += v);
                            }
                        }
                        Some(Axis::Rows) => {
                            for i in 0..r {
                                for j in 0..c {
                                    buf[i * c + j] += g.data()[j] / r as f64;
                                }
                            }
                        }
                    }
                }
            }
            Op::MaskedFill { x, mask } => {
                if self.wants(*x) {
                    let buf = grad_buf(grads, *x, y.rows(), y.cols());
                    for ((o, gg), &m) in buf.iter_mut().zip(g.data()).zip(mask.iter()) {
                        if !m {
                            *o += gg;
                        }
                    }
                }
            }
            Op::Gather { x, index } => {
                if self.wants(*x) {
                    let tx = self.value(*x);
                    scatter_add(grad_buf(grads, *x, tx.rows(), tx.cols()), g, Some(index), tx.cols());
                }
            }
            Op::IndexedSum { terms } => {
                for (v, idx) in terms {
                    if self.wants(*v) {
                        let tv = self.value(*v);
                        scatter_add(grad_buf(grads, *v, tv.rows(), tv.cols()), g, idx.as_ref(), tv.cols());
                    }
                }
            }
            Op::SegmentMax { x, argmax } => {
                if self.wants(*x) {
                    let tx = self.value(*x);
                    let c = tx.cols();
                    let buf = grad_buf(grads, *x, tx.rows(), c);
                    for (flat, (&r, gg)) in argmax.iter().zip(g.data()).enumerate() {
                        if r != NONE {
                            buf[r as usize * c + flat % c] += gg;
                        }
                    }
                }
            }
            Op::SegmentMean { x, segment, counts } => {
                if self.wants(*x) {
                    let tx = self.value(*x);
                    let c = tx.cols();
                    let buf = grad_buf(grads, *x, tx.rows(), c);
                    for (r, &s) in segment.iter().enumerate() {
                        if s == NONE {
                            continue;
                        }
                        let s = s as usize;
                        let inv = 1.0 / counts[s] as f64;
                        buf[r * c..(r + 1) * c]
                            .iter_mut()
                            .zip(g.row(s))
                            .for_each(|(o, v)| *o += v * inv);
                    }
                }
            }
            Op::SegmentLogSumExp { x, offsets } => {
                if self.wants(*x) {
                    let tx = self.value(*x);
                    let buf = grad_buf(grads, *x, tx.rows(), 1);
                    for (s, w) in offsets.windows(2).enumerate() {
                        let (gg, lse) = (g.data()[s], y.data()[s]);
                        for r in w[0]..w[1] {
                            buf[r] += gg * (tx.data()[r] - lse).exp();
                        }
                    }
                }
            }
            Op::LayerNorm { x, rstd } => {
                if self.wants(*x) {
                    let c = y.cols().max(1);
                    let buf = grad_buf(grads, *x, y.rows(), y.cols());
                    for (r, ((orow, grow), yrow)) in
                        buf.chunks_mut(c).zip(g.data().chunks(c)).zip(y.data().chunks(c)).enumerate()
                    {
                        let gmean = grow.iter().sum::<f64>() / c as f64;
                        let gymean = grow.iter().zip(yrow).map(|(a, b)| a * b).sum::<f64>() / c as f64;
                        for ((o, gg), yy) in orow.iter_mut().zip(grow).zip(yrow) {
                            *o += rstd[r] * (gg - gmean - yy * gymean);
                        }
                    }
                }
            }
            Op::BceWithLogits { x, targets } => {
                if self.wants(*x) {
                    let tx = self.value(*x);
                    let buf = grad_buf(grads, *x, tx.rows(), tx.cols());
                    for (((o, gg), &z), &t) in buf.iter_mut().zip(g.data()).zip(tx.data()).zip(targets.iter()) {
                        *o += gg * (sigmoid(z) - t);
                    }
                }
            }
            Op::Attention(saved) => self.attention_backward(saved, g, grads),
        }
    }

    fn attention_backward(&self, s: &AttentionSaved, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let (tq, tk, tv) = (self.value(s.q), self.value(s.k), self.value(s.v));
        let (l, d) = (tq.rows(), tq.cols());
        let dk = d / s.heads;
        let scale = 1.0 / (dk as f64).sqrt();
        let nnz = s.csr.cols.len();
        let mut dq = vec![0.0; l * d];
        let mut dkm = vec![0.0; l * d];
        let mut dv = vec![0.0; l * d];
        let mut dlogit = Vec::new();
        for h in 0..s.heads {
            let lo = h * dk;
            for i in 0..l {
                let (a, b) = (s.csr.offsets[i], s.csr.offsets[i + 1]);
                if a == b {
                    continue;
                }
                let gi = &g.row(i)[lo..lo + dk];
                let w = &s.weights[h * nnz + a..h * nnz + b];
                let cols = &s.csr.cols[a..b];
                dlogit.clear();
                let mut dot = 0.0;
                for (&wp, &j) in w.iter().zip(cols) {
                    let j = j as usize;
                    let vj = &tv.row(j)[lo..lo + dk];
                    let da: f64 = gi.iter().zip(vj).map(|(x, y)| x * y).sum();
                    dlogit.push(da);
                    dot += wp * da;
                    dv[j * d + lo..j * d + lo + dk]
                        .iter_mut()
                        .zip(gi)
                        .for_each(|(o, x)| *o += wp * x);
                }
                let qi = &tq.row(i)[lo..lo + dk];
                for ((&wp, &j), da) in w.iter().zip(cols).zip(&dlogit) {
                    let j = j as usize;
                    let ds = wp * (da - dot) * scale;
                    let kj = &tk.row(j)[lo..lo + dk];
                    dq[i * d + lo..i * d + lo + dk]
                        .iter_mut()
                        .zip(kj)
                        .for_each(|(o, x)| *o += ds * x);
                    dkm[j * d + lo..j * d + lo + dk]
                        .iter_mut()
                        .zip(qi)
                        .for_each(|(o, x)| *o += ds * x);
                }
            }
        }
        for (v, src) in [(s.q, dq), (s.k, dkm), (s.v, dv)] {
            if self.wants(v) {
                grad_buf(grads, v, l, d).iter_mut().zip(&src).for_each(|(o, x)| *o += x);
            }
        }
    }

    fn acc_map(&self, grads: &mut [Option<Tensor>], v: Var, g: &Tensor, f: impl Fn(f64) -> f64) {
        if self.wants(v) {
            let buf = grad_buf(grads, v, g.rows(), g.cols());
            buf.iter_mut().zip(g.data()).for_each(|(o, x)| *o += f(*x));
        }
    }
}

fn grad_buf(grads: &mut [Option<Tensor>], v: Var, rows: usize, cols: usize) -> &mut [f64] {
    grads[v.0]
        .get_or_insert_with(|| Tensor::zeros(rows, cols))
        .data_mut()
}

fn scatter_add(buf: &mut [f64], g: &Tensor, index: Option<&Rc<[u32]>>, c: usize) {
    match index {
        None => buf.iter_mut().zip(g.data()).for_each(|(o, x)| *o += x),
        Some(idx) => {
            for (grow, &i) in g.data().chunks(c.max(1)).zip(idx.iter()) {
                if i != NONE {
                    let i = i as usize;
                    buf[i * c..(i + 1) * c]
                        .iter_mut()
                        .zip(grow)
                        .for_each(|(o, x)| *o += x);
                }
            }
        }
    }
}

fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn first_argmax(xs: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, x) in xs.enumerate() {
        if i == 0 || x > best.1 {
            best = (i, x);
        }
    }
    best.0
}
