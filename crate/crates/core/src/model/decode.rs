//! Output decoders, losses and argmax predictions per [`OutputKind`].

use std::rc::Rc;

use crate::autodiff::{Axis, Tape, Tensor, Var, NONE};
use crate::error::{Error, Result};
use crate::model::{Batch, Bound, ParamSet};
use crate::oracles::{Labels, OutputKind};
use crate::processors::State;
use crate::rng::Rng;
use crate::taskgen::TaskId;

/// Decoder logits plus the bookkeeping needed to score them.
#[derive(Clone, Debug)]
pub struct Logits {
    pub kind: OutputKind,
    /// Column of scores. Pointer kinds: segments of candidates, one segment per
    /// output row. Edge masks: one logit per graph edge.
    pub scores: Var,
    /// Pointer kinds: `offsets[r]..offsets[r + 1]` are the candidates of row `r`.
    pub offsets: Rc<[usize]>,
    /// Number of output rows per graph.
    pub rows_per_graph: Vec<usize>,
}

pub fn register(task: TaskId, p: &mut ParamSet, d: usize, rng: &mut Rng) -> Result<()> {
    match task.output_kind() {
        OutputKind::NodePointer => {
            for part in ["i", "j", "e"] {
                p.weight(&format!("dec.{part}"), d, d, 3 * d, rng)?;
            }
        }
        OutputKind::EdgeMask => {
            for part in ["u", "v", "fwd", "rev"] {
                p.weight(&format!("dec.{part}"), d, d, 4 * d, rng)?;
            }
        }
        OutputKind::GraphPointer => {
            p.weight("dec.node", d, d, 2 * d, rng)?;
            p.weight("dec.pool", d, d, 2 * d, rng)?;
        }
        OutputKind::PairPointer => {
            for part in ["i", "j", "k", "e"] {
                p.weight(&format!("dec.{part}"), d, d, 4 * d, rng)?;
            }
        }
    }
    p.bias("dec.b", d)?;
    let heads = match task.output_kind() {
        OutputKind::GraphPointer => task.graph_pointer_heads(),
        _ => 1,
    };
    p.weight("dec.out", d, heads, d, rng)?;
    p.bias("dec.out_b", heads)
}

fn idx(v: Vec<u32>) -> Option<Rc<[u32]>> {
    Some(Rc::from(v))
}

/// Hidden layer then a linear read-out to one column per head.
fn head(tape: &mut Tape, p: &Bound, pre: Var) -> Result<Var> {
    let h = tape.add_row(pre, p.var("dec.b")?)?;
    let h = tape.relu(h);
    let out = tape.matmul(h, p.var("dec.out")?)?;
    tape.add_row(out, p.var("dec.out_b")?)
}

/// Scores of every candidate `j` for row `i`: `MLP([h_i, h_j, m_{j->i}])`.
fn node_pointer(tape: &mut Tape, p: &Bound, batch: &Batch, s: State) -> Result<Logits> {
    let (mut rows, mut cols, mut arcs, mut offsets) = (Vec::new(), Vec::new(), Vec::new(), vec![0]);
    let mut rows_per_graph = Vec::new();
    for b in 0..batch.num_graphs() {
        let n = batch.graph_size(b);
        let base = batch.node_offsets[b];
        for i in 0..n {
            for j in 0..n {
                rows.push((base + i) as u32);
                cols.push((base + j) as u32);
                arcs.push(if i == j { NONE } else { batch.arc(b, j, i) });
            }
            offsets.push(offsets.last().expect("nonempty") + n);
        }
        rows_per_graph.push(n);
    }
    let hi = tape.matmul(s.nodes, p.var("dec.i")?)?;
    let hj = tape.matmul(s.nodes, p.var("dec.j")?)?;
    let he = tape.matmul(s.arcs, p.var("dec.e")?)?;
    let pre = tape.indexed_sum(rows.len(), vec![(hi, idx(rows)), (hj, idx(cols)), (he, idx(arcs))])?;
    Ok(Logits {
        kind: OutputKind::NodePointer,
        scores: head(tape, p, pre)?,
        offsets: offsets.into(),
        rows_per_graph,
    })
}

/// One logit per graph edge from `[h_u, h_v, m_{u->v}, m_{v->u}]`.
fn edge_mask(tape: &mut Tape, p: &Bound, batch: &Batch, s: State) -> Result<Logits> {
    let (mut us, mut vs, mut fwd, mut rev) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut rows_per_graph = Vec::new();
    for (b, g) in batch.graphs.iter().enumerate() {
        let base = batch.node_offsets[b];
        for e in g.edges() {
            us.push((base + e.u) as u32);
            vs.push((base + e.v) as u32);
            fwd.push(batch.arc(b, e.u, e.v));
            rev.push(batch.arc(b, e.v, e.u));
        }
        rows_per_graph.push(g.num_edges());
    }
    let total = us.len();
    let hu = tape.matmul(s.nodes, p.var("dec.u")?)?;
    let hv = tape.matmul(s.nodes, p.var("dec.v")?)?;
    let hf = tape.matmul(s.arcs, p.var("dec.fwd")?)?;
    let hr = tape.matmul(s.arcs, p.var("dec.rev")?)?;
    let pre = tape.indexed_sum(total, vec![(hu, idx(us)), (hv, idx(vs)), (hf, idx(fwd)), (hr, idx(rev))])?;
    Ok(Logits {
        kind: OutputKind::EdgeMask,
        scores: head(tape, p, pre)?,
        offsets: (0..=total).collect::<Vec<_>>().into(),
        rows_per_graph,
    })
}

/// Per-node logits from `[h_v, mean_v h_v]`; one column per pointer head.
fn graph_pointer(tape: &mut Tape, p: &Bound, batch: &Batch, s: State, heads: usize) -> Result<Logits> {
    let pooled = tape.segment_mean(s.nodes, batch.node_graph.clone(), batch.num_graphs())?;
    let hn = tape.matmul(s.nodes, p.var("dec.node")?)?;
    let hp = tape.matmul(pooled, p.var("dec.pool")?)?;
    let pre = tape.indexed_sum(
        batch.num_nodes(),
        vec![(hn, None), (hp, Some(batch.node_graph.clone()))],
    )?;
    let out = head(tape, p, pre)?;
    // Stack the head columns so row r of head k lives in segment k * B + b.
    let cols = (0..heads)
        .map(|k| tape.slice(out, Axis::Cols, k, k + 1))
        .collect::<Result<Vec<_>>>()?;
    let scores = tape.concat(&cols, Axis::Rows)?;
    let nn = batch.num_nodes();
    let mut offsets = vec![0];
    for k in 0..heads {
        offsets.extend(batch.node_offsets[1..].iter().map(|o| k * nn + o));
    }
    Ok(Logits {
        kind: OutputKind::GraphPointer,
        scores,
        offsets: offsets.into(),
        rows_per_graph: vec![heads; batch.num_graphs()],
    })
}

/// For each ordered pair `(i, j)`, scores of every `k` from `[h_i, h_j, h_k, m_{k->j}]`.
fn pair_pointer(tape: &mut Tape, p: &Bound, batch: &Batch, s: State) -> Result<Logits> {
    let (mut is, mut js, mut ks, mut arcs, mut offsets) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), vec![0]);
    let mut rows_per_graph = Vec::new();
    for b in 0..batch.num_graphs() {
        let n = batch.graph_size(b);
        let base = batch.node_offsets[b];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    is.push((base + i) as u32);
                    js.push((base + j) as u32);
                    ks.push((base + k) as u32);
                    arcs.push(if k == j { NONE } else { batch.arc(b, k, j) });
                }
                offsets.push(offsets.last().expect("nonempty") + n);
            }
        }
        rows_per_graph.push(n * n);
    }
    let total = is.len();
    let hi = tape.matmul(s.nodes, p.var("dec.i")?)?;
    let hj = tape.matmul(s.nodes, p.var("dec.j")?)?;
    let hk = tape.matmul(s.nodes, p.var("dec.k")?)?;
    let he = tape.matmul(s.arcs, p.var("dec.e")?)?;
    let pre = tape.indexed_sum(
        total,
        vec![(hi, idx(is)), (hj, idx(js)), (hk, idx(ks)), (he, idx(arcs))],
    )?;
    Ok(Logits {
        kind: OutputKind::PairPointer,
        scores: head(tape, p, pre)?,
        offsets: offsets.into(),
        rows_per_graph,
    })
}

pub fn decode(task: TaskId, tape: &mut Tape, p: &Bound, batch: &Batch, s: State) -> Result<Logits> {
    match task.output_kind() {
        OutputKind::NodePointer => node_pointer(tape, p, batch, s),
        OutputKind::EdgeMask => edge_mask(tape, p, batch, s),
        OutputKind::GraphPointer => graph_pointer(tape, p, batch, s, task.graph_pointer_heads()),
        OutputKind::PairPointer => pair_pointer(tape, p, batch, s),
    }
}

/// Targets as row-major candidate indices (pointer kinds) or 0/1 flags (masks),
/// in the row order of [`Logits`].
fn targets(logits: &Logits, labels: &[Labels]) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    match logits.kind {
        OutputKind::GraphPointer => {
            let heads = logits.rows_per_graph.first().copied().unwrap_or(0);
            for k in 0..heads {
                for l in labels {
                    out.push(*l.values.get(k).ok_or_else(|| Error::Input("graph pointer label too short".into()))?);
                }
            }
        }
        _ => {
            for l in labels {
                out.extend_from_slice(&l.values);
            }
        }
    }
    for (l, &rows) in labels.iter().zip(&logits.rows_per_graph) {
        if l.kind != logits.kind || l.values.len() != rows {
            return Err(Error::Input(format!(
                "labels of kind {:?} with {} values do not match {} decoder rows",
                l.kind,
                l.values.len(),
                rows
            )));
        }
    }
    Ok(out)
}

/// Mean row-wise cross-entropy for pointers, mean binary cross-entropy for masks.
pub fn loss(tape: &mut Tape, logits: &Logits, labels: &[Labels]) -> Result<Var> {
    let t = targets(logits, labels)?;
    if logits.kind == OutputKind::EdgeMask {
        let y: Vec<f64> = t.iter().map(|&v| if v > 0 { 1.0 } else { 0.0 }).collect();
        if y.is_empty() {
            return Ok(tape.constant(Tensor::scalar(0.0)));
        }
        let b = tape.bce_with_logits(logits.scores, y.into())?;
        return Ok(tape.mean_reduce(b, None));
    }
    let picked: Vec<u32> = t
        .iter()
        .enumerate()
        .map(|(r, &c)| (logits.offsets[r] + c) as u32)
        .collect();
    for (r, &c) in t.iter().enumerate() {
        if logits.offsets[r] + c >= logits.offsets[r + 1] {
            return Err(Error::Input(format!("target {c} out of range in row {r}")));
        }
    }
    let lse = tape.segment_logsumexp(logits.scores, logits.offsets.clone())?;
    let pick = tape.gather_rows(logits.scores, picked.into())?;
    let ce = tape.sub(lse, pick)?;
    Ok(tape.mean_reduce(ce, None))
}

/// Argmax per row (ties to the lowest index) or `logit > 0` for masks.
pub fn predict(scores: &Tensor, logits: &Logits) -> Vec<Labels> {
    let s = scores.data();
    let graphs = logits.rows_per_graph.len();
    match logits.kind {
        OutputKind::EdgeMask => {
            let mut out = Vec::with_capacity(graphs);
            let mut off = 0;
            for &m in &logits.rows_per_graph {
                let vals = s[off..off + m].iter().map(|&x| usize::from(x > 0.0)).collect();
                out.push(Labels::new(OutputKind::EdgeMask, vals));
                off += m;
            }
            out
        }
        kind => {
            let row_pred: Vec<usize> = logits
                .offsets
                .windows(2)
                .map(|w| argmax(&s[w[0]..w[1]]))
                .collect();
            if kind == OutputKind::GraphPointer {
                let heads = logits.rows_per_graph.first().copied().unwrap_or(0);
                return (0..graphs)
                    .map(|b| Labels::new(kind, (0..heads).map(|k| row_pred[k * graphs + b]).collect()))
                    .collect();
            }
            let mut out = Vec::with_capacity(graphs);
            let mut off = 0;
            for &rows in &logits.rows_per_graph {
                out.push(Labels::new(kind, row_pred[off..off + rows].to_vec()));
                off += rows;
            }
            out
        }
    }
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
