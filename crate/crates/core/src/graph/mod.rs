//! Graph representation, random samplers and structural transforms.

mod line;
mod sample;

pub use line::{line_graph, LineGraph};
pub use sample::{
    sample_er, sample_k_regular, sample_two_community_pair, ProbePair, MAX_RESAMPLE_ATTEMPTS,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// Simple graph stored as an edge list.
///
/// Undirected graphs keep each edge once with `u < v`. The edge list is the
/// source of truth; adjacency views are built on demand.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n: usize,
    directed: bool,
    edges: Vec<Edge>,
}

impl Graph {
    /// Graph on `n` nodes with no edges.
    pub fn empty(n: usize, directed: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("graph needs at least one node".into()));
        }
        Ok(Self {
            n,
            directed,
            edges: Vec::new(),
        })
    }

    /// Builds a graph from `(u, v, weight)` triples, validating ids, self-loops,
    /// duplicates and weights. Undirected pairs are normalized to `u < v`.
    pub fn from_edges(
        n: usize,
        directed: bool,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut g = Self::empty(n, directed)?;
        for (u, v, w) in edges {
            g.add_edge(u, v, w)?;
        }
        Ok(g)
    }

    /// Complete graph (all `u < v` pairs, or all ordered pairs when directed).
    pub fn complete(n: usize, directed: bool) -> Result<Self> {
        let mut g = Self::empty(n, directed)?;
        for u in 0..n {
            for v in 0..n {
                if u != v && (directed || u < v) {
                    g.edges.push(Edge { u, v, weight: 1.0 });
                }
            }
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, u: usize, v: usize, weight: f64) -> Result<usize> {
        if u >= self.n || v >= self.n {
            return Err(Error::Parameter(format!(
                "edge ({u}, {v}) out of range for {} nodes",
                self.n
            )));
        }
        if u == v {
            return Err(Error::Parameter(format!("self-loop at node {u}")));
        }
        if !weight.is_finite() {
            return Err(Error::Parameter(format!("non-finite weight on ({u}, {v})")));
        }
        let (u, v) = if self.directed || u < v { (u, v) } else { (v, u) };
        if self.edge_index(u, v).is_some() {
            return Err(Error::Parameter(format!("duplicate edge ({u}, {v})")));
        }
        self.edges.push(Edge { u, v, weight });
        Ok(self.edges.len() - 1)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Index of the edge joining `u` and `v` (either orientation when undirected).
    pub fn edge_index(&self, u: usize, v: usize) -> Option<usize> {
        let (a, b) = if self.directed || u < v { (u, v) } else { (v, u) };
        self.edges.iter().position(|e| e.u == a && e.v == b)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edge_index(u, v).is_some()
    }

    pub fn set_weights(&mut self, weights: &[f64]) -> Result<()> {
        if weights.len() != self.edges.len() {
            return Err(Error::Parameter(format!(
                "{} weights for {} edges",
                weights.len(),
                self.edges.len()
            )));
        }
        for (e, &w) in self.edges.iter_mut().zip(weights) {
            if !w.is_finite() {
                return Err(Error::Parameter("non-finite weight".into()));
            }
            e.weight = w;
        }
        Ok(())
    }

    /// Outgoing adjacency as `(neighbor, edge index)` lists sorted by neighbor.
    /// Undirected edges appear in both endpoint lists.
    pub fn out_adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n];
        for (i, e) in self.edges.iter().enumerate() {
            adj[e.u].push((e.v, i));
            if !self.directed {
                adj[e.v].push((e.u, i));
            }
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Incoming adjacency, sorted by neighbor. Same as [`Self::out_adjacency`] when undirected.
    pub fn in_adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        if !self.directed {
            return self.out_adjacency();
        }
        let mut adj = vec![Vec::new(); self.n];
        for (i, e) in self.edges.iter().enumerate() {
            adj[e.v].push((e.u, i));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Dense `n x n` weight view; `None` where there is no arc.
    pub fn dense_weights(&self) -> Vec<Vec<Option<f64>>> {
        let mut w = vec![vec![None; self.n]; self.n];
        for e in &self.edges {
            w[e.u][e.v] = Some(e.weight);
            if !self.directed {
                w[e.v][e.u] = Some(e.weight);
            }
        }
        w
    }

    /// Undirected degree (in + out for directed graphs).
    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for e in &self.edges {
            d[e.u] += 1;
            d[e.v] += 1;
        }
        d
    }

    /// Number of weakly connected components.
    pub fn count_components(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut comps = self.n;
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.u), find(&mut parent, e.v));
            if a != b {
                parent[a] = b;
                comps -= 1;
            }
        }
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.count_components() == 1
    }

    /// Graph with the same nodes and edge `index` removed.
    pub fn without_edge(&self, index: usize) -> Graph {
        let mut g = self.clone();
        g.edges.remove(index);
        g
    }

    /// Node-induced subgraph. Nodes are relabeled `0..k` in the order given;
    /// edges keep their weights and their relative order.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<Graph> {
        if nodes.is_empty() {
            return Err(Error::Parameter("empty node subset".into()));
        }
        let mut relabel = vec![None; self.n];
        for (new, &old) in nodes.iter().enumerate() {
            if old >= self.n {
                return Err(Error::Parameter(format!("node {old} out of range")));
            }
            if relabel[old].is_some() {
                return Err(Error::Parameter(format!("node {old} repeated")));
            }
            relabel[old] = Some(new);
        }
        let mut g = Graph::empty(nodes.len(), self.directed)?;
        for e in &self.edges {
            if let (Some(a), Some(b)) = (relabel[e.u], relabel[e.v]) {
                let (a, b) = if self.directed || a < b { (a, b) } else { (b, a) };
                g.edges.push(Edge {
                    u: a,
                    v: b,
                    weight: e.weight,
                });
            }
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        Graph::from_edges(3, false, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(Graph::from_edges(3, false, [(0, 3, 1.0)]).is_err());
        assert!(Graph::from_edges(3, false, [(1, 1, 1.0)]).is_err());
        assert!(Graph::from_edges(3, false, [(0, 1, 1.0), (1, 0, 1.0)]).is_err());
        assert!(Graph::from_edges(3, true, [(0, 1, 1.0), (1, 0, 1.0)]).is_ok());
        assert!(Graph::from_edges(3, false, [(0, 1, f64::NAN)]).is_err());
        assert!(Graph::empty(0, false).is_err());
    }

    #[test]
    fn undirected_edges_are_normalized() {
        let g = Graph::from_edges(3, false, [(2, 0, 0.5)]).unwrap();
        assert_eq!(g.edges()[0], Edge { u: 0, v: 2, weight: 0.5 });
        assert!(g.has_edge(2, 0));
    }

    #[test]
    fn induced_path_prefix() {
        let sub = path3().induced_subgraph(&[0, 1]).unwrap();
        assert_eq!(sub.n(), 2);
        assert_eq!(sub.edges(), &[Edge { u: 0, v: 1, weight: 1.0 }]);
    }

    #[test]
    fn induced_triangle_pair() {
        let tri = Graph::from_edges(3, false, [(0, 1, 0.1), (1, 2, 0.2), (0, 2, 0.3)]).unwrap();
        let sub = tri.induced_subgraph(&[0, 2]).unwrap();
        assert_eq!(sub.edges(), &[Edge { u: 0, v: 1, weight: 0.3 }]);
    }

    #[test]
    fn induced_relabels_in_subset_order() {
        let sub = path3().induced_subgraph(&[2, 1]).unwrap();
        assert_eq!(sub.edges(), &[Edge { u: 0, v: 1, weight: 1.0 }]);
        assert!(path3().induced_subgraph(&[0, 0]).is_err());
        assert!(path3().induced_subgraph(&[5]).is_err());
        assert!(path3().induced_subgraph(&[]).is_err());
    }

    #[test]
    fn components() {
        let g = Graph::from_edges(4, false, [(0, 1, 1.0)]).unwrap();
        assert_eq!(g.count_components(), 3);
        assert!(path3().is_connected());
    }
}

/// Free-function form of [`Graph::induced_subgraph`].
pub fn induced_subgraph(g: &Graph, nodes: &[usize]) -> Result<Graph> {
    g.induced_subgraph(nodes)
}
