//! Exact label generators for every task, and independent brute-force checks.
//!
//! Conventions shared by all pointer outputs: roots, unreachable nodes and
//! the largest element of a sorted sequence point to themselves. Ties are
//! broken towards the lowest index.

mod algorithms;
pub mod reference;

pub use algorithms::{
    bfs_parents, dfs_forest, mst, sequence_oracle, shortest_paths, structure, MstMode,
    SequenceMode, ShortestPathMode, StructureMode,
};
pub use reference::{brute_force_check, Problem, MAX_CHECK_NODES};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    /// One target node per node.
    NodePointer,
    /// One bit per edge of the input edge list.
    EdgeMask,
    /// One (or two, for subarray bounds) selected nodes per graph.
    GraphPointer,
    /// One target node per ordered node pair, row-major.
    PairPointer,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    pub kind: OutputKind,
    pub values: Vec<usize>,
}

impl Labels {
    pub fn new(kind: OutputKind, values: Vec<usize>) -> Self {
        Self { kind, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Relative tolerance used when comparing path costs computed along different
/// summation orders.
pub(crate) fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}
