use std::collections::BTreeMap;

use rayon::prelude::*;

use super::encoding::{
    encode_positions, PositionEncoding, EDGE_POS_CHANNEL, POS_CHANNEL,
    RANDOM_FEATURE_CHANNEL,
};
use super::{DatasetConfig, GraphGenerator, GraphShape, Split, TaskId};
use crate::error::{Error, Result};
use crate::graph::{sample_er, sample_k_regular, Graph};
use crate::oracles::{
    bfs_parents, dfs_forest, mst, sequence_oracle, shortest_paths, structure, Labels, MstMode,
    Problem, SequenceMode, ShortestPathMode, StructureMode,
};
use crate::rng::{derive_seed, Rng};

pub const START_CHANNEL: &str = "start";
pub const VALUE_CHANNEL: &str = "value";
pub const WEIGHT_CHANNEL: &str = "weight";

/// One labeled example: a graph (sequences use the complete graph), its input
/// channels and the oracle labels.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskInstance {
    pub task: TaskId,
    pub seed: u64,
    pub graph: Graph,
    /// Row-major `n x dim` per channel.
    pub node_inputs: BTreeMap<String, Vec<f64>>,
    /// `(u, v, value)` entries per channel.
    pub edge_inputs: BTreeMap<String, Vec<(usize, usize, f64)>>,
    pub labels: Labels,
}

impl TaskInstance {
    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn node_channel_dim(&self, channel: &str) -> Option<usize> {
        self.node_inputs.get(channel).map(|v| v.len() / self.n())
    }

    pub fn start_node(&self) -> usize {
        self.node_inputs
            .get(START_CHANNEL)
            .and_then(|flags| flags.iter().position(|&f| f > 0.5))
            .unwrap_or(0)
    }

    pub fn values(&self) -> Option<&[f64]> {
        self.node_inputs.get(VALUE_CHANNEL).map(Vec::as_slice)
    }

    pub fn problem(&self) -> Problem<'_> {
        match self.task.shape() {
            GraphShape::Sequence => Problem::Sequence(self.values().unwrap_or(&[])),
            _ => Problem::Graph {
                graph: &self.graph,
                start: self.start_node(),
            },
        }
    }

    /// Replaces the position channels with `encoding`.
    pub fn set_positions(&mut self, encoding: PositionEncoding, rng: &mut Rng) {
        self.node_inputs.remove(POS_CHANNEL);
        self.node_inputs.remove(RANDOM_FEATURE_CHANNEL);
        self.edge_inputs.remove(EDGE_POS_CHANNEL);
        let f = encode_positions(self.n(), encoding, rng);
        self.node_inputs.insert(f.channel.to_string(), f.node);
        if let Some(edge) = f.edge {
            self.edge_inputs.insert(EDGE_POS_CHANNEL.to_string(), edge);
        }
    }

    /// Random-scalar training mix: with probability 1/2 the whole graph gets a
    /// sorted random index, otherwise the deterministic scalar index.
    pub fn mix_random_scalar(&mut self, rng: &mut Rng) {
        let enc = if rng.bernoulli(0.5) {
            PositionEncoding::RandomScalar
        } else {
            PositionEncoding::Scalar
        };
        self.set_positions(enc, rng);
    }
}

/// Recomputes the oracle labels for `task` on the given input.
pub fn label_instance(task: TaskId, graph: &Graph, start: usize, values: Option<&[f64]>) -> Result<Labels> {
    let seq = || values.ok_or_else(|| Error::Input(format!("{task} needs a value channel")));
    match task {
        TaskId::Bfs => bfs_parents(graph, start),
        TaskId::Dfs => Ok(dfs_forest(graph)),
        TaskId::BellmanFord => shortest_paths(graph, ShortestPathMode::BellmanFord, Some(start)),
        TaskId::DagShortestPaths => shortest_paths(graph, ShortestPathMode::Dag, Some(start)),
        TaskId::FloydWarshall => shortest_paths(graph, ShortestPathMode::FloydWarshall, None),
        TaskId::MstPrim => mst(graph, MstMode::Prim, start),
        TaskId::MstKruskal => mst(graph, MstMode::Kruskal, start),
        TaskId::TopologicalSort => structure(graph, StructureMode::Topological),
        TaskId::StronglyConnectedComponents => structure(graph, StructureMode::Scc),
        TaskId::Bridges => structure(graph, StructureMode::Bridges),
        TaskId::Quicksort => sequence_oracle(seq()?, SequenceMode::Sort),
        TaskId::FindMaximumSubarrayKadane => sequence_oracle(seq()?, SequenceMode::Kadane),
        TaskId::Minimum => sequence_oracle(seq()?, SequenceMode::Minimum),
    }
}

fn sample_base(config: &DatasetConfig, split: Split, directed: bool, rng: &mut Rng) -> Result<Graph> {
    let n = config.split_len(split);
    match config.generator {
        GraphGenerator::ErFixedP => sample_er(n, config.er_p, directed, rng),
        GraphGenerator::KRegular => {
            let k = config
                .split_degree(split)
                .ok_or_else(|| Error::Parameter("k-regular generator needs K".into()))?;
            let g = sample_k_regular(n, k, rng)?;
            if directed {
                let flipped = g.edges().iter().map(|e| {
                    if rng.bernoulli(0.5) {
                        (e.v, e.u, e.weight)
                    } else {
                        (e.u, e.v, e.weight)
                    }
                });
                Graph::from_edges(n, true, flipped.collect::<Vec<_>>())
            } else {
                Ok(g)
            }
        }
    }
}

/// Orients every edge of `g` from lower to higher rank under a random ranking.
fn orient_acyclic(g: &Graph, rng: &mut Rng) -> Result<Graph> {
    let mut rank: Vec<usize> = (0..g.n()).collect();
    rng.shuffle(&mut rank);
    let arcs: Vec<_> = g
        .edges()
        .iter()
        .map(|e| {
            if rank[e.u] < rank[e.v] {
                (e.u, e.v, e.weight)
            } else {
                (e.v, e.u, e.weight)
            }
        })
        .collect();
    Graph::from_edges(g.n(), true, arcs)
}

/// Samples one instance of `task` for `split` of `config`.
pub fn make_instance(task: TaskId, config: &DatasetConfig, split: Split, rng: &mut Rng) -> Result<TaskInstance> {
    let n = config.split_len(split);
    let mut graph = match task.shape() {
        GraphShape::Sequence => Graph::complete(n, false)?,
        GraphShape::Undirected => sample_base(config, split, false, rng)?,
        GraphShape::Directed => sample_base(config, split, true, rng)?,
        GraphShape::Dag => {
            let g = sample_base(config, split, false, rng)?;
            orient_acyclic(&g, rng)?
        }
    };
    let mut node_inputs = BTreeMap::new();
    let mut edge_inputs = BTreeMap::new();

    if task.weighted() {
        let w: Vec<f64> = (0..graph.num_edges()).map(|_| rng.uniform()).collect();
        graph.set_weights(&w)?;
        edge_inputs.insert(
            WEIGHT_CHANNEL.to_string(),
            graph.edges().iter().map(|e| (e.u, e.v, e.weight)).collect(),
        );
    }
    let start = if task.has_start() { rng.below(n) } else { 0 };
    if task.has_start() {
        let mut flags = vec![0.0; n];
        flags[start] = 1.0;
        node_inputs.insert(START_CHANNEL.to_string(), flags);
    }
    let values = task.value_range().map(|(lo, hi)| {
        (0..n).map(|_| rng.uniform_range(lo, hi)).collect::<Vec<f64>>()
    });
    if let Some(v) = &values {
        node_inputs.insert(VALUE_CHANNEL.to_string(), v.clone());
    }
    let labels = label_instance(task, &graph, start, values.as_deref())?;

    let mut inst = TaskInstance {
        task,
        seed: rng.seed(),
        graph,
        node_inputs,
        edge_inputs,
        labels,
    };
    match (config.encoding, split) {
        (PositionEncoding::RandomScalar, Split::Train) => inst.mix_random_scalar(rng),
        (PositionEncoding::RandomScalar, _) => inst.set_positions(PositionEncoding::Scalar, rng),
        (enc, _) => inst.set_positions(enc, rng),
    }
    Ok(inst)
}

/// Seed of instance `index` of a split. Each (task, split) pair draws from
/// its own derived stream so no two splits share a seed.
pub fn instance_seed(master: u64, task: TaskId, split: Split, index: usize) -> u64 {
    derive_seed(master, &[task.index() as u64, split.index(), index as u64])
}

/// Generates a whole split; instances are independent and built in parallel.
pub fn generate_split(config: &DatasetConfig, task: TaskId, split: Split, master_seed: u64) -> Result<Vec<TaskInstance>> {
    config.validate()?;
    (0..config.split_size(split))
        .into_par_iter()
        .map(|i| {
            let mut rng = Rng::new(instance_seed(master_seed, task, split, i));
            make_instance(task, config, split, &mut rng)
        })
        .collect()
}

/// Restricts an instance to its first `keep` nodes while keeping the original
/// position channels, so indices occupy only a prefix of `[0, 1)`. Labels are
/// recomputed on the subgraph; a start node outside the prefix moves to node 0.
pub fn prefix_instance(inst: &TaskInstance, keep: usize) -> Result<TaskInstance> {
    if keep == 0 || keep > inst.n() {
        return Err(Error::Parameter(format!("cannot keep {keep} of {} nodes", inst.n())));
    }
    let nodes: Vec<usize> = (0..keep).collect();
    let graph = inst.graph.induced_subgraph(&nodes)?;
    let n = inst.n();
    let mut node_inputs = BTreeMap::new();
    for (name, data) in &inst.node_inputs {
        let dim = data.len() / n;
        node_inputs.insert(name.clone(), data[..keep * dim].to_vec());
    }
    let start = if inst.start_node() < keep { inst.start_node() } else { 0 };
    if inst.task.has_start() {
        let mut flags = vec![0.0; keep];
        flags[start] = 1.0;
        node_inputs.insert(START_CHANNEL.to_string(), flags);
    }
    let edge_inputs = inst
        .edge_inputs
        .iter()
        .map(|(name, entries)| {
            let kept = entries.iter().copied().filter(|&(u, v, _)| u < keep && v < keep).collect();
            (name.clone(), kept)
        })
        .collect();
    let values = node_inputs.get(VALUE_CHANNEL).cloned();
    let labels = label_instance(inst.task, &graph, start, values.as_deref())?;
    Ok(TaskInstance {
        task: inst.task,
        seed: inst.seed,
        graph,
        node_inputs,
        edge_inputs,
        labels,
    })
}
