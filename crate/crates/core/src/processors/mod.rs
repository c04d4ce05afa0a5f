//! Per-step hidden-state updates: MPNN (max aggregation, given or fully
//! connected arcs), the 2WL line-graph transformer, and hybrids of two
//! processors mixed by averaging or by a learned sigmoid gate.
//!
//! Every processor keeps a node state (`N x d`) and an arc state (`E x d`,
//! one row per ordered arc of the batch).

use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Csr, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::model::{Batch, Bound, Connectivity, ParamSet};
use crate::rng::Rng;

pub const TWL_HEADS: usize = 4;
pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessorKind {
    Mpnn,
    #[serde(rename = "2wl")]
    Twl,
}

impl ProcessorKind {
    pub fn name(self) -> &'static str {
        match self {
            ProcessorKind::Mpnn => "mpnn",
            ProcessorKind::Twl => "2wl",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HybridMode {
    Average,
    Sigmoid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProcessorConfig {
    Mpnn,
    MpnnFc,
    #[serde(rename = "2wl")]
    Twl,
    Hybrid {
        mode: HybridMode,
        first: ProcessorKind,
        second: ProcessorKind,
    },
}

impl ProcessorConfig {
    pub const HYBRID_AVERAGE: ProcessorConfig = ProcessorConfig::Hybrid {
        mode: HybridMode::Average,
        first: ProcessorKind::Mpnn,
        second: ProcessorKind::Twl,
    };
    pub const HYBRID_SIGMOID: ProcessorConfig = ProcessorConfig::Hybrid {
        mode: HybridMode::Sigmoid,
        first: ProcessorKind::Mpnn,
        second: ProcessorKind::Twl,
    };

    pub fn connectivity(self) -> Connectivity {
        match self {
            ProcessorConfig::MpnnFc => Connectivity::FullyConnected,
            _ => Connectivity::Given,
        }
    }

    pub fn needs_line_graph(self) -> bool {
        match self {
            ProcessorConfig::Twl => true,
            ProcessorConfig::Hybrid { first, second, .. } => {
                first == ProcessorKind::Twl || second == ProcessorKind::Twl
            }
            _ => false,
        }
    }

    /// 32 for message passing, 16 for processors that involve 2WL.
    pub fn default_batch_size(self) -> usize {
        if self.needs_line_graph() {
            16
        } else {
            32
        }
    }
}

impl fmt::Display for ProcessorConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ProcessorConfig::Mpnn => f.write_str("mpnn"),
            ProcessorConfig::MpnnFc => f.write_str("mpnn-fc"),
            ProcessorConfig::Twl => f.write_str("2wl"),
            ProcessorConfig::Hybrid { mode, first, second } => {
                let m = match mode {
                    HybridMode::Average => "average",
                    HybridMode::Sigmoid => "sigmoid",
                };
                write!(f, "hybrid-{m}")?;
                if (first, second) != (ProcessorKind::Mpnn, ProcessorKind::Twl) {
                    write!(f, ":{}+{}", first.name(), second.name())?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for ProcessorConfig {
    type Err = Error;

    /// Accepts `mpnn`, `mpnn-fc`, `2wl`, `hybrid-average`, `hybrid-sigmoid`,
    /// optionally followed by `:a+b` to pick the two hybrid members.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parameter(format!("unknown processor `{s}`"));
        let lower = s.to_ascii_lowercase().replace('_', "-");
        let (head, pair) = match lower.split_once(':') {
            Some((h, p)) => (h.to_string(), Some(p.to_string())),
            None => (lower, None),
        };
        let kind = |k: &str| match k {
            "mpnn" => Ok(ProcessorKind::Mpnn),
            "2wl" => Ok(ProcessorKind::Twl),
            _ => Err(bad()),
        };
        let mode = match head.as_str() {
            "mpnn" if pair.is_none() => return Ok(ProcessorConfig::Mpnn),
            "mpnn-fc" if pair.is_none() => return Ok(ProcessorConfig::MpnnFc),
            "2wl" if pair.is_none() => return Ok(ProcessorConfig::Twl),
            "hybrid-average" => HybridMode::Average,
            "hybrid-sigmoid" => HybridMode::Sigmoid,
            _ => return Err(bad()),
        };
        let (first, second) = match pair {
            None => (ProcessorKind::Mpnn, ProcessorKind::Twl),
            Some(p) => {
                let (a, b) = p.split_once('+').ok_or_else(bad)?;
                (kind(a)?, kind(b)?)
            }
        };
        Ok(ProcessorConfig::Hybrid { mode, first, second })
    }
}

/// Hidden state carried between steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct State {
    pub nodes: Var,
    pub arcs: Var,
}

/// Encoded inputs shared by every step.
#[derive(Clone, Copy, Debug)]
pub struct Encoded {
    pub nodes: Var,
    pub arcs: Var,
}

fn mpnn_register(p: &mut ParamSet, prefix: &str, d: usize, rng: &mut Rng) -> Result<()> {
    // Message: Linear([h_u, z_u, h_v, z_v, h_e, z_e]); update: Linear([h_v, z_v, agg]).
    let msg_in = 6 * d;
    for part in ["src_h", "src_z", "dst_h", "dst_z", "arc_h", "arc_z"] {
        p.weight(&format!("{prefix}.msg.{part}"), d, d, msg_in, rng)?;
    }
    p.bias(&format!("{prefix}.msg.b"), d)?;
    let upd_in = 3 * d;
    for part in ["h", "z", "agg"] {
        p.weight(&format!("{prefix}.upd.{part}"), d, d, upd_in, rng)?;
    }
    p.bias(&format!("{prefix}.upd.b"), d)
}

fn twl_register(p: &mut ParamSet, prefix: &str, d: usize, rng: &mut Rng) -> Result<()> {
    // Line-node input: Linear([h_e, z_u, z_v, z_e]).
    for part in ["h", "zu", "zv", "ze"] {
        p.weight(&format!("{prefix}.in.{part}"), d, d, 4 * d, rng)?;
    }
    p.bias(&format!("{prefix}.in.b"), d)?;
    for part in ["q", "k", "v", "o"] {
        p.weight(&format!("{prefix}.att.{part}"), d, d, d, rng)?;
    }
    p.weight(&format!("{prefix}.ff.w1"), d, 2 * d, d, rng)?;
    p.bias(&format!("{prefix}.ff.b1"), 2 * d)?;
    p.weight(&format!("{prefix}.ff.w2"), 2 * d, d, 2 * d, rng)?;
    p.bias(&format!("{prefix}.ff.b2"), d)?;
    // Node refresh for the incident-max readout.
    p.weight(&format!("{prefix}.node.h"), d, d, 2 * d, rng)?;
    p.weight(&format!("{prefix}.node.z"), d, d, 2 * d, rng)?;
    p.bias(&format!("{prefix}.node.b"), d)
}

fn register_kind(kind: ProcessorKind, p: &mut ParamSet, prefix: &str, d: usize, rng: &mut Rng) -> Result<()> {
    match kind {
        ProcessorKind::Mpnn => mpnn_register(p, prefix, d, rng),
        ProcessorKind::Twl => twl_register(p, prefix, d, rng),
    }
}

/// Adds the processor's parameters under the `proc` prefix.
pub fn register(config: ProcessorConfig, p: &mut ParamSet, d: usize, rng: &mut Rng) -> Result<()> {
    match config {
        ProcessorConfig::Mpnn | ProcessorConfig::MpnnFc => mpnn_register(p, "proc", d, rng),
        ProcessorConfig::Twl => twl_register(p, "proc", d, rng),
        ProcessorConfig::Hybrid { mode, first, second } => {
            register_kind(first, p, "proc.p1", d, rng)?;
            register_kind(second, p, "proc.p2", d, rng)?;
            if mode == HybridMode::Sigmoid {
                p.weight("proc.gate", d, 1, d, rng)?;
            }
            Ok(())
        }
    }
}

/// Step-invariant projections of the encoded inputs, computed once per forward pass.
#[derive(Clone, Debug)]
pub enum Prepared {
    Mpnn { src: Var, dst: Var, arc: Var, upd: Var },
    Twl { line: Var, node: Var },
    Hybrid {
        mode: HybridMode,
        first: (ProcessorKind, Box<Prepared>),
        second: (ProcessorKind, Box<Prepared>),
    },
}

fn lin(tape: &mut Tape, x: Var, w: Var) -> Result<Var> {
    tape.matmul(x, w)
}

fn mpnn_prepare(tape: &mut Tape, p: &Bound, prefix: &str, z: Encoded) -> Result<Prepared> {
    let src = lin(tape, z.nodes, p.var(&format!("{prefix}.msg.src_z"))?)?;
    let dst = lin(tape, z.nodes, p.var(&format!("{prefix}.msg.dst_z"))?)?;
    let arc = lin(tape, z.arcs, p.var(&format!("{prefix}.msg.arc_z"))?)?;
    let arc = tape.add_row(arc, p.var(&format!("{prefix}.msg.b"))?)?;
    let upd = lin(tape, z.nodes, p.var(&format!("{prefix}.upd.z"))?)?;
    let upd = tape.add_row(upd, p.var(&format!("{prefix}.upd.b"))?)?;
    Ok(Prepared::Mpnn { src, dst, arc, upd })
}

fn twl_prepare(tape: &mut Tape, p: &Bound, prefix: &str, z: Encoded, batch: &Batch) -> Result<Prepared> {
    let zu = lin(tape, z.nodes, p.var(&format!("{prefix}.in.zu"))?)?;
    let zv = lin(tape, z.nodes, p.var(&format!("{prefix}.in.zv"))?)?;
    let ze = lin(tape, z.arcs, p.var(&format!("{prefix}.in.ze"))?)?;
    let line = tape.indexed_sum(
        batch.num_arcs(),
        vec![
            (zu, Some(batch.src.clone())),
            (zv, Some(batch.dst.clone())),
            (ze, None),
        ],
    )?;
    let line = tape.add_row(line, p.var(&format!("{prefix}.in.b"))?)?;
    let node = lin(tape, z.nodes, p.var(&format!("{prefix}.node.z"))?)?;
    let node = tape.add_row(node, p.var(&format!("{prefix}.node.b"))?)?;
    Ok(Prepared::Twl { line, node })
}

fn prepare_kind(kind: ProcessorKind, tape: &mut Tape, p: &Bound, prefix: &str, z: Encoded, batch: &Batch) -> Result<Prepared> {
    match kind {
        ProcessorKind::Mpnn => mpnn_prepare(tape, p, prefix, z),
        ProcessorKind::Twl => twl_prepare(tape, p, prefix, z, batch),
    }
}

pub fn prepare(config: ProcessorConfig, tape: &mut Tape, p: &Bound, z: Encoded, batch: &Batch) -> Result<Prepared> {
    match config {
        ProcessorConfig::Mpnn | ProcessorConfig::MpnnFc => mpnn_prepare(tape, p, "proc", z),
        ProcessorConfig::Twl => twl_prepare(tape, p, "proc", z, batch),
        ProcessorConfig::Hybrid { mode, first, second } => Ok(Prepared::Hybrid {
            mode,
            first: (first, Box::new(prepare_kind(first, tape, p, "proc.p1", z, batch)?)),
            second: (second, Box::new(prepare_kind(second, tape, p, "proc.p2", z, batch)?)),
        }),
    }
}

/// One MPNN step with max aggregation over incoming arcs. Nodes without
/// incoming arcs aggregate zeros; the new arc state is the message.
pub fn mpnn_step(tape: &mut Tape, p: &Bound, prefix: &str, prep: &Prepared, batch: &Batch, s: State) -> Result<State> {
    let Prepared::Mpnn { src, dst, arc, upd } = *prep else {
        return Err(Error::Parameter("mpnn step needs mpnn projections".into()));
    };
    let hs = lin(tape, s.nodes, p.var(&format!("{prefix}.msg.src_h"))?)?;
    let hs = tape.add(hs, src)?;
    let hd = lin(tape, s.nodes, p.var(&format!("{prefix}.msg.dst_h"))?)?;
    let hd = tape.add(hd, dst)?;
    let he = lin(tape, s.arcs, p.var(&format!("{prefix}.msg.arc_h"))?)?;
    let msg = tape.indexed_sum(
        batch.num_arcs(),
        vec![
            (hs, Some(batch.src.clone())),
            (hd, Some(batch.dst.clone())),
            (he, None),
            (arc, None),
        ],
    )?;
    let msg = tape.relu(msg);
    let agg = tape.segment_max(msg, &batch.dst, batch.num_nodes())?;
    let a = lin(tape, s.nodes, p.var(&format!("{prefix}.upd.h"))?)?;
    let b = lin(tape, agg, p.var(&format!("{prefix}.upd.agg"))?)?;
    let h = tape.indexed_sum(batch.num_nodes(), vec![(a, None), (b, None), (upd, None)])?;
    Ok(State {
        nodes: tape.relu(h),
        arcs: msg,
    })
}

/// One pre-norm transformer layer over line-nodes (arcs), attention masked to
/// the line graph plus self. Node states become the max over incoming arcs
/// plus a learned self-update, so nodes with no arcs still change.
pub fn twl_step(tape: &mut Tape, p: &Bound, prefix: &str, prep: &Prepared, batch: &Batch, s: State) -> Result<State> {
    let Prepared::Twl { line, node } = *prep else {
        return Err(Error::Parameter("2wl step needs 2wl projections".into()));
    };
    let csr = batch
        .line
        .clone()
        .ok_or_else(|| Error::Input("batch was built without line graphs".into()))?;
    let x = lin(tape, s.arcs, p.var(&format!("{prefix}.in.h"))?)?;
    let x = tape.add(x, line)?;
    let a = tape.layer_norm_rows(x, LAYER_NORM_EPS);
    let q = lin(tape, a, p.var(&format!("{prefix}.att.q"))?)?;
    let k = lin(tape, a, p.var(&format!("{prefix}.att.k"))?)?;
    let v = lin(tape, a, p.var(&format!("{prefix}.att.v"))?)?;
    let att = tape.masked_attention(q, k, v, TWL_HEADS, csr)?;
    let att = lin(tape, att, p.var(&format!("{prefix}.att.o"))?)?;
    let y = tape.add(x, att)?;
    let f = tape.layer_norm_rows(y, LAYER_NORM_EPS);
    let f = lin(tape, f, p.var(&format!("{prefix}.ff.w1"))?)?;
    let f = tape.add_row(f, p.var(&format!("{prefix}.ff.b1"))?)?;
    let f = tape.relu(f);
    let f = lin(tape, f, p.var(&format!("{prefix}.ff.w2"))?)?;
    let f = tape.add_row(f, p.var(&format!("{prefix}.ff.b2"))?)?;
    let arcs = tape.add(y, f)?;
    let readout = tape.segment_max(arcs, &batch.dst, batch.num_nodes())?;
    let selfu = lin(tape, s.nodes, p.var(&format!("{prefix}.node.h"))?)?;
    let selfu = tape.add(selfu, node)?;
    let selfu = tape.relu(selfu);
    let nodes = tape.add(readout, selfu)?;
    Ok(State { nodes, arcs })
}

fn step_kind(kind: ProcessorKind, tape: &mut Tape, p: &Bound, prefix: &str, prep: &Prepared, batch: &Batch, s: State) -> Result<State> {
    match kind {
        ProcessorKind::Mpnn => mpnn_step(tape, p, prefix, prep, batch, s),
        ProcessorKind::Twl => twl_step(tape, p, prefix, prep, batch, s),
    }
}

/// `(a + b) / 2` on both node and arc slots.
pub fn average(tape: &mut Tape, a: State, b: State) -> Result<State> {
    let n = tape.add(a.nodes, b.nodes)?;
    let e = tape.add(a.arcs, b.arcs)?;
    Ok(State {
        nodes: tape.affine(n, 0.5, 0.0),
        arcs: tape.affine(e, 0.5, 0.0),
    })
}

fn gate_mix(tape: &mut Tape, gate_w: Var, pre: Var, a: Var, b: Var) -> Result<Var> {
    let g = tape.matmul(pre, gate_w)?;
    let g = tape.sigmoid(g);
    let rest = tape.affine(g, -1.0, 1.0);
    let x = tape.mul_col(a, g)?;
    let y = tape.mul_col(b, rest)?;
    tape.add(x, y)
}

/// `g * a + (1 - g) * b` with `g = sigmoid(h_prev . w)` per node and per arc.
pub fn sigmoid_mix(tape: &mut Tape, gate_w: Var, prev: State, a: State, b: State) -> Result<State> {
    Ok(State {
        nodes: gate_mix(tape, gate_w, prev.nodes, a.nodes, b.nodes)?,
        arcs: gate_mix(tape, gate_w, prev.arcs, a.arcs, b.arcs)?,
    })
}

/// Both hybrid members run on the same incoming state.
pub fn hybrid_members(tape: &mut Tape, p: &Bound, prep: &Prepared, batch: &Batch, s: State) -> Result<(State, State)> {
    let Prepared::Hybrid { first, second, .. } = prep else {
        return Err(Error::Parameter("hybrid step needs hybrid projections".into()));
    };
    let a = step_kind(first.0, tape, p, "proc.p1", &first.1, batch, s)?;
    let b = step_kind(second.0, tape, p, "proc.p2", &second.1, batch, s)?;
    Ok((a, b))
}

pub fn step(config: ProcessorConfig, tape: &mut Tape, p: &Bound, prep: &Prepared, batch: &Batch, s: State) -> Result<State> {
    match config {
        ProcessorConfig::Mpnn | ProcessorConfig::MpnnFc => mpnn_step(tape, p, "proc", prep, batch, s),
        ProcessorConfig::Twl => twl_step(tape, p, "proc", prep, batch, s),
        ProcessorConfig::Hybrid { mode, .. } => {
            let (a, b) = hybrid_members(tape, p, prep, batch, s)?;
            match mode {
                HybridMode::Average => average(tape, a, b),
                HybridMode::Sigmoid => sigmoid_mix(tape, p.var("proc.gate")?, s, a, b),
            }
        }
    }
}

/// Zero initial state for `batch`.
pub fn initial_state(tape: &mut Tape, batch: &Batch, d: usize) -> State {
    State {
        nodes: tape.constant(Tensor::zeros(batch.num_nodes(), d)),
        arcs: tape.constant(Tensor::zeros(batch.num_arcs(), d)),
    }
}

/// Sum of the recorded attention weights of every nonempty row, per head.
pub fn attention_row_sums(tape: &Tape, att: Var, csr: &Rc<Csr>, heads: usize) -> Option<Vec<f64>> {
    let w = tape.attention_weights(att)?;
    let nnz = csr.cols.len();
    let mut sums = Vec::new();
    for h in 0..heads {
        for i in 0..csr.rows() {
            let (a, b) = (csr.offsets[i], csr.offsets[i + 1]);
            if a < b {
                sums.push(w[h * nnz + a..h * nnz + b].iter().sum());
            }
        }
    }
    Some(sums)
}
