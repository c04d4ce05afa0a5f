use super::Graph;
use crate::error::Result;

/// Graph whose nodes are the edges of a source graph.
///
/// Line-node `i` stands for source edge `i` (same index), and two line-nodes
/// are adjacent when their source edges share an endpoint, regardless of
/// direction. The input of line-node `i` is `[x_u, x_v, x_e]` for source edge
/// `e = (u, v)`; [`LineGraph::endpoints`] carries that recipe.
#[derive(Clone, Debug, PartialEq)]
pub struct LineGraph {
    endpoints: Vec<(usize, usize)>,
    adjacency: Vec<(usize, usize)>,
    source_nodes: usize,
}

impl LineGraph {
    pub fn num_nodes(&self) -> usize {
        self.endpoints.len()
    }

    /// Source edge endpoints per line-node.
    pub fn endpoints(&self) -> &[(usize, usize)] {
        &self.endpoints
    }

    /// Line-edges as `(i, j)` with `i < j`, sorted.
    pub fn adjacency(&self) -> &[(usize, usize)] {
        &self.adjacency
    }

    pub fn source_nodes(&self) -> usize {
        self.source_nodes
    }

    /// Sorted neighbor lists, without self.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.num_nodes()];
        for &(i, j) in &self.adjacency {
            nb[i].push(j);
            nb[j].push(i);
        }
        for l in &mut nb {
            l.sort_unstable();
        }
        nb
    }

    /// Concatenated per-line-node inputs `[x_u, x_v, x_e]`.
    pub fn features(&self, node_x: &[Vec<f64>], edge_x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.endpoints
            .iter()
            .enumerate()
            .map(|(i, &(u, v))| {
                let mut f = node_x[u].clone();
                f.extend_from_slice(&node_x[v]);
                f.extend_from_slice(&edge_x[i]);
                f
            })
            .collect()
    }

    /// The line graph as an ordinary undirected graph with unit weights.
    pub fn to_graph(&self) -> Result<Graph> {
        Graph::from_edges(
            self.num_nodes().max(1),
            false,
            self.adjacency.iter().map(|&(i, j)| (i, j, 1.0)),
        )
    }
}

pub fn line_graph(g: &Graph) -> LineGraph {
    let mut incident = vec![Vec::new(); g.n()];
    for (i, e) in g.edges().iter().enumerate() {
        incident[e.u].push(i);
        incident[e.v].push(i);
    }
    let mut adjacency = Vec::new();
    for list in &incident {
        for (a, &i) in list.iter().enumerate() {
            for &j in &list[a + 1..] {
                adjacency.push((i.min(j), i.max(j)));
            }
        }
    }
    adjacency.sort_unstable();
    // Antiparallel arcs of a directed graph share both endpoints.
    adjacency.dedup();
    LineGraph {
        endpoints: g.edges().iter().map(|e| (e.u, e.v)).collect(),
        adjacency,
        source_nodes: g.n(),
    }
}
