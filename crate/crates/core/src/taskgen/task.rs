use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::oracles::OutputKind;

/// The implemented algorithm catalog, under the merged task names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskId {
    Bfs,
    Dfs,
    BellmanFord,
    DagShortestPaths,
    FloydWarshall,
    MstPrim,
    MstKruskal,
    TopologicalSort,
    StronglyConnectedComponents,
    Bridges,
    Quicksort,
    FindMaximumSubarrayKadane,
    Minimum,
}

/// How the input graph of a task is shaped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphShape {
    Undirected,
    Directed,
    /// Undirected sample oriented along a random node ranking.
    Dag,
    /// Sequence on a fully connected undirected graph.
    Sequence,
}

impl TaskId {
    pub const ALL: [TaskId; 13] = [
        TaskId::Bfs,
        TaskId::Dfs,
        TaskId::BellmanFord,
        TaskId::DagShortestPaths,
        TaskId::FloydWarshall,
        TaskId::MstPrim,
        TaskId::MstKruskal,
        TaskId::TopologicalSort,
        TaskId::StronglyConnectedComponents,
        TaskId::Bridges,
        TaskId::Quicksort,
        TaskId::FindMaximumSubarrayKadane,
        TaskId::Minimum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskId::Bfs => "bfs",
            TaskId::Dfs => "dfs",
            TaskId::BellmanFord => "bellman_ford",
            TaskId::DagShortestPaths => "dag_shortest_paths",
            TaskId::FloydWarshall => "floyd_warshall",
            TaskId::MstPrim => "mst_prim",
            TaskId::MstKruskal => "mst_kruskal",
            TaskId::TopologicalSort => "topological_sort",
            TaskId::StronglyConnectedComponents => "strongly_connected_components",
            TaskId::Bridges => "bridges",
            TaskId::Quicksort => "quicksort",
            TaskId::FindMaximumSubarrayKadane => "find_maximum_subarray_kadane",
            TaskId::Minimum => "minimum",
        }
    }

    pub fn index(self) -> usize {
        TaskId::ALL.iter().position(|&t| t == self).expect("listed")
    }

    pub fn output_kind(self) -> OutputKind {
        match self {
            TaskId::MstPrim | TaskId::MstKruskal | TaskId::Bridges => OutputKind::EdgeMask,
            TaskId::FloydWarshall => OutputKind::PairPointer,
            TaskId::FindMaximumSubarrayKadane | TaskId::Minimum => OutputKind::GraphPointer,
            _ => OutputKind::NodePointer,
        }
    }

    /// Number of graph-level pointers decoded (0 for other output kinds).
    pub fn graph_pointer_heads(self) -> usize {
        match self {
            TaskId::FindMaximumSubarrayKadane => 2,
            TaskId::Minimum => 1,
            _ => 0,
        }
    }

    pub fn shape(self) -> GraphShape {
        match self {
            TaskId::Dfs | TaskId::StronglyConnectedComponents | TaskId::FloydWarshall => {
                GraphShape::Directed
            }
            TaskId::DagShortestPaths | TaskId::TopologicalSort => GraphShape::Dag,
            TaskId::Quicksort | TaskId::FindMaximumSubarrayKadane | TaskId::Minimum => {
                GraphShape::Sequence
            }
            _ => GraphShape::Undirected,
        }
    }

    pub fn weighted(self) -> bool {
        matches!(
            self,
            TaskId::BellmanFord
                | TaskId::DagShortestPaths
                | TaskId::FloydWarshall
                | TaskId::MstPrim
                | TaskId::MstKruskal
        )
    }

    pub fn has_start(self) -> bool {
        matches!(
            self,
            TaskId::Bfs | TaskId::BellmanFord | TaskId::DagShortestPaths | TaskId::MstPrim
        )
    }

    /// Range of the value channel for sequence tasks.
    pub fn value_range(self) -> Option<(f64, f64)> {
        match self {
            TaskId::Quicksort | TaskId::Minimum => Some((0.0, 1.0)),
            // all-positive inputs would make the whole array the answer every time
            TaskId::FindMaximumSubarrayKadane => Some((-1.0, 1.0)),
            _ => None,
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = match s {
            "sort" => "quicksort",
            "kadane" => "find_maximum_subarray_kadane",
            "scc" => "strongly_connected_components",
            other => other,
        };
        TaskId::ALL
            .into_iter()
            .find(|t| t.name() == key)
            .ok_or_else(|| Error::Parameter(format!("unknown task `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for t in TaskId::ALL {
            assert_eq!(t.name().parse::<TaskId>().unwrap(), t);
            let json = serde_json::to_string(&t).unwrap();
            assert_eq!(json, format!("\"{}\"", t.name()));
        }
        assert_eq!("sort".parse::<TaskId>().unwrap(), TaskId::Quicksort);
        assert!("articulation_points".parse::<TaskId>().is_err());
    }

    #[test]
    fn every_output_kind_is_used() {
        use std::collections::HashSet;
        let kinds: HashSet<_> = TaskId::ALL.iter().map(|t| t.output_kind()).collect();
        assert_eq!(kinds.len(), 4);
    }
}
