use std::collections::HashMap;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Csr, Tensor, NONE};
use crate::error::{Error, Result};
use crate::graph::{line_graph, Graph};
use crate::oracles::Labels;
use crate::taskgen::encoding::EDGE_POS_CHANNEL;
use crate::taskgen::{PositionEncoding, TaskId, START_CHANNEL, VALUE_CHANNEL, WEIGHT_CHANNEL};

/// Which ordered pairs carry messages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connectivity {
    /// Both directions of every graph edge.
    Given,
    /// Every ordered pair of distinct nodes.
    FullyConnected,
}

/// Column layout of the node and arc input matrices for a task and encoding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureSchema {
    /// `(channel, width)` in column order.
    pub node_channels: Vec<(String, usize)>,
    /// Edge channels after the two structural columns (`adj`, `rev`).
    pub edge_channels: Vec<String>,
}

pub const STRUCTURAL_ARC_COLUMNS: usize = 2;

impl FeatureSchema {
    pub fn new(task: TaskId, encoding: PositionEncoding) -> Self {
        let (pos, width) = encoding.node_channel();
        let mut node_channels = vec![(pos.to_string(), width)];
        if task.has_start() {
            node_channels.push((START_CHANNEL.to_string(), 1));
        }
        if task.value_range().is_some() {
            node_channels.push((VALUE_CHANNEL.to_string(), 1));
        }
        let mut edge_channels = Vec::new();
        if task.weighted() {
            edge_channels.push(WEIGHT_CHANNEL.to_string());
        }
        if encoding.has_edge_channel() {
            edge_channels.push(EDGE_POS_CHANNEL.to_string());
        }
        Self {
            node_channels,
            edge_channels,
        }
    }

    pub fn node_dim(&self) -> usize {
        self.node_channels.iter().map(|c| c.1).sum()
    }

    pub fn arc_dim(&self) -> usize {
        STRUCTURAL_ARC_COLUMNS + self.edge_channels.len()
    }
}

/// Several instances of one task packed into a block-diagonal graph.
///
/// Nodes of graph `b` occupy rows `node_offsets[b]..node_offsets[b + 1]`,
/// its arcs `arc_offsets[b]..arc_offsets[b + 1]`. Arcs are sorted by
/// `(src, dst)` within a graph.
#[derive(Clone, Debug)]
pub struct Batch {
    pub task: TaskId,
    pub node_offsets: Vec<usize>,
    pub arc_offsets: Vec<usize>,
    pub node_x: Tensor,
    pub arc_x: Tensor,
    pub src: Rc<[u32]>,
    pub dst: Rc<[u32]>,
    /// Graph id per node.
    pub node_graph: Rc<[u32]>,
    /// Per graph, `n x n` table of global arc ids (`NONE` when absent), row = source.
    pub arc_table: Vec<Vec<u32>>,
    /// Line-graph attention pattern over arcs, including self-attention.
    pub line: Option<Rc<Csr>>,
    pub graphs: Vec<Graph>,
    pub labels: Vec<Labels>,
}

fn arc_lookup(entries: &[(usize, usize, f64)], undirected: bool) -> HashMap<(usize, usize), f64> {
    let mut map = HashMap::with_capacity(entries.len() * 2);
    for &(u, v, x) in entries {
        map.insert((u, v), x);
        if undirected {
            map.insert((v, u), x);
        }
    }
    map
}

impl Batch {
    pub fn new(
        instances: &[&crate::taskgen::TaskInstance],
        schema: &FeatureSchema,
        connectivity: Connectivity,
        with_line: bool,
    ) -> Result<Self> {
        let task = match instances.first() {
            Some(i) => i.task,
            None => return Err(Error::Input("empty batch".into())),
        };
        let node_dim = schema.node_dim();
        let arc_dim = schema.arc_dim();
        let mut node_offsets = vec![0];
        let mut arc_offsets = vec![0];
        let mut node_x = Vec::new();
        let mut arc_x = Vec::new();
        let mut src = Vec::new();
        let mut dst = Vec::new();
        let mut node_graph = Vec::new();
        let mut arc_table = Vec::with_capacity(instances.len());
        let mut line_rows: Vec<Vec<usize>> = Vec::new();
        for (b, inst) in instances.iter().enumerate() {
            if inst.task != task {
                return Err(Error::Input(format!("batch mixes {task} and {}", inst.task)));
            }
            let n = inst.n();
            for name in inst.node_inputs.keys() {
                if !schema.node_channels.iter().any(|(c, _)| c == name) {
                    return Err(Error::UnknownChannel(name.clone()));
                }
            }
            for name in inst.edge_inputs.keys() {
                if !schema.edge_channels.contains(name) {
                    return Err(Error::UnknownChannel(name.clone()));
                }
            }
            let base = node_x.len() / node_dim.max(1);
            let mut rows = vec![0.0; n * node_dim];
            let mut col = 0;
            for (name, width) in &schema.node_channels {
                let data = inst
                    .node_inputs
                    .get(name)
                    .ok_or_else(|| Error::Input(format!("{task} instance lacks node channel `{name}`")))?;
                if data.len() != n * width {
                    return Err(Error::Input(format!(
                        "node channel `{name}` has {} values for {n} nodes of width {width}",
                        data.len()
                    )));
                }
                for v in 0..n {
                    rows[v * node_dim + col..v * node_dim + col + width]
                        .copy_from_slice(&data[v * width..(v + 1) * width]);
                }
                col += width;
            }
            node_x.extend(rows);
            node_graph.extend(std::iter::repeat_n(b as u32, n));

            let g = &inst.graph;
            let undirected = !g.directed();
            let edge_maps: Vec<_> = schema
                .edge_channels
                .iter()
                .map(|c| {
                    inst.edge_inputs
                        .get(c)
                        .map(|e| arc_lookup(e, undirected && c != EDGE_POS_CHANNEL))
                        .unwrap_or_default()
                })
                .collect();
            let mut forward = vec![false; n * n];
            for e in g.edges() {
                forward[e.u * n + e.v] = true;
                if undirected {
                    forward[e.v * n + e.u] = true;
                }
            }
            let arc_base = src.len();
            let mut table = vec![NONE; n * n];
            let mut local_arcs = Vec::new();
            for u in 0..n {
                for v in 0..n {
                    if u == v {
                        continue;
                    }
                    let fwd = forward[u * n + v];
                    let rev = !fwd && forward[v * n + u];
                    if connectivity == Connectivity::Given && !fwd && !rev {
                        continue;
                    }
                    table[u * n + v] = (arc_base + local_arcs.len()) as u32;
                    local_arcs.push((u, v));
                    src.push((base + u) as u32);
                    dst.push((base + v) as u32);
                    arc_x.push(if fwd { 1.0 } else { 0.0 });
                    arc_x.push(if rev { 1.0 } else { 0.0 });
                    for m in &edge_maps {
                        arc_x.push(m.get(&(u, v)).copied().unwrap_or(0.0));
                    }
                }
            }
            if with_line {
                let arcs = Graph::from_edges(n, true, local_arcs.iter().map(|&(u, v)| (u, v, 1.0)))?;
                let lg = line_graph(&arcs);
                for (i, mut nb) in lg.neighbors().into_iter().enumerate() {
                    nb.push(i);
                    nb.sort_unstable();
                    line_rows.push(nb.into_iter().map(|j| j + arc_base).collect());
                }
            }
            arc_table.push(table);
            node_offsets.push(base + n);
            arc_offsets.push(src.len());
        }
        let total_nodes = *node_offsets.last().expect("nonempty");
        let total_arcs = src.len();
        Ok(Self {
            task,
            node_x: Tensor::new(total_nodes, node_dim, node_x)?,
            arc_x: Tensor::new(total_arcs, arc_dim, arc_x)?,
            node_offsets,
            arc_offsets,
            src: src.into(),
            dst: dst.into(),
            node_graph: node_graph.into(),
            arc_table,
            line: with_line.then(|| Rc::new(Csr::from_lists(&line_rows))),
            graphs: instances.iter().map(|i| i.graph.clone()).collect(),
            labels: instances.iter().map(|i| i.labels.clone()).collect(),
        })
    }

    pub fn num_graphs(&self) -> usize {
        self.graphs.len()
    }

    pub fn num_nodes(&self) -> usize {
        *self.node_offsets.last().expect("nonempty")
    }

    pub fn num_arcs(&self) -> usize {
        self.src.len()
    }

    pub fn graph_size(&self, b: usize) -> usize {
        self.node_offsets[b + 1] - self.node_offsets[b]
    }

    /// Global arc id of `u -> v` in graph `b` (local node ids).
    pub fn arc(&self, b: usize, u: usize, v: usize) -> u32 {
        let n = self.graph_size(b);
        self.arc_table[b][u * n + v]
    }
}
