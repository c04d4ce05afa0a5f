use std::collections::BTreeSet;

use super::{Edge, Graph};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Retry cap shared by the rejection loops below.
pub const MAX_RESAMPLE_ATTEMPTS: usize = 1000;

/// Erdős–Rényi graph: every candidate pair (ordered when `directed`) is kept
/// independently with probability `p`. Pairs are visited in lexicographic
/// order. Weights are 1.0.
pub fn sample_er(n: usize, p: f64, directed: bool, rng: &mut Rng) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Parameter(format!("edge probability {p} not in [0, 1]")));
    }
    let mut g = Graph::empty(n, directed)?;
    for u in 0..n {
        for v in 0..n {
            if u == v || (!directed && v < u) {
                continue;
            }
            if rng.bernoulli(p) {
                g.edges.push(Edge { u, v, weight: 1.0 });
            }
        }
    }
    Ok(g)
}

/// Uniform-ish random simple `k`-regular graph via the pairing model.
///
/// Stubs are shuffled and paired; pairs that would form a loop or a repeated
/// edge are returned to the pool and re-paired. A pool that can no longer
/// produce a valid pair restarts the whole graph, up to
/// [`MAX_RESAMPLE_ATTEMPTS`] times.
pub fn sample_k_regular(n: usize, k: usize, rng: &mut Rng) -> Result<Graph> {
    if n == 0 || k >= n || (n * k) % 2 == 1 {
        return Err(Error::Parameter(format!(
            "no simple {k}-regular graph on {n} nodes (need k < n and n*k even)"
        )));
    }
    for _ in 0..MAX_RESAMPLE_ATTEMPTS {
        if let Some(pairs) = try_pairing(n, k, rng) {
            let mut g = Graph::empty(n, false)?;
            g.edges = pairs
                .into_iter()
                .map(|(u, v)| Edge { u, v, weight: 1.0 })
                .collect();
            return Ok(g);
        }
    }
    Err(Error::Generation(format!(
        "{k}-regular graph on {n} nodes not found in {MAX_RESAMPLE_ATTEMPTS} attempts"
    )))
}

fn try_pairing(n: usize, k: usize, rng: &mut Rng) -> Option<Vec<(usize, usize)>> {
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, k)).collect();
    while !stubs.is_empty() {
        rng.shuffle(&mut stubs);
        let mut leftover = vec![0usize; n];
        for pair in stubs.chunks_exact(2) {
            let (a, b) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if a != b && !edges.contains(&(a, b)) {
                edges.insert((a, b));
            } else {
                leftover[a] += 1;
                leftover[b] += 1;
            }
        }
        let pending: Vec<usize> = (0..n).filter(|&v| leftover[v] > 0).collect();
        let pairable = pending.iter().enumerate().any(|(i, &a)| {
            pending[i + 1..]
                .iter()
                .any(|&b| !edges.contains(&(a, b)))
        });
        if !pending.is_empty() && !pairable {
            return None;
        }
        stubs = pending
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, leftover[v]))
            .collect();
    }
    Some(edges.into_iter().collect())
}

/// Two Erdős–Rényi communities joined by one edge, and a sibling graph with a
/// second joining edge.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbePair {
    /// Communities plus `probe_edge`.
    pub single: Graph,
    /// `single` plus one more inter-community edge.
    pub double: Graph,
    /// Inter-community edge present in both graphs, stored as `(u, v)` with `u < v`.
    pub probe_edge: (usize, usize),
    /// Community id (0 or 1) per node.
    pub community: Vec<u8>,
}

impl ProbePair {
    pub fn probe_index_single(&self) -> usize {
        self.single
            .edge_index(self.probe_edge.0, self.probe_edge.1)
            .expect("probe edge present in single graph")
    }

    pub fn probe_index_double(&self) -> usize {
        self.double
            .edge_index(self.probe_edge.0, self.probe_edge.1)
            .expect("probe edge present in double graph")
    }
}

fn connected_er(n: usize, p: f64, rng: &mut Rng) -> Result<Graph> {
    for _ in 0..MAX_RESAMPLE_ATTEMPTS {
        let g = sample_er(n, p, false, rng)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::Generation(format!(
        "no connected ER({n}, {p}) community in {MAX_RESAMPLE_ATTEMPTS} attempts"
    )))
}

/// Community A holds nodes `0..n_per_side`, community B the rest. Each
/// community is resampled until connected.
pub fn sample_two_community_pair(n_per_side: usize, p_intra: f64, rng: &mut Rng) -> Result<ProbePair> {
    if n_per_side < 2 {
        return Err(Error::Parameter("each community needs at least 2 nodes".into()));
    }
    let s = n_per_side;
    let left = connected_er(s, p_intra, rng)?;
    let right = connected_er(s, p_intra, rng)?;

    let mut single = Graph::empty(2 * s, false)?;
    single.edges.extend(left.edges.iter().copied());
    single.edges.extend(right.edges.iter().map(|e| Edge {
        u: e.u + s,
        v: e.v + s,
        weight: e.weight,
    }));

    let first = (rng.below(s), s + rng.below(s));
    let second = loop {
        let cand = (rng.below(s), s + rng.below(s));
        if cand != first {
            break cand;
        }
    };
    single.add_edge(first.0, first.1, 1.0)?;
    let mut double = single.clone();
    double.add_edge(second.0, second.1, 1.0)?;

    let community = (0..2 * s).map(|v| u8::from(v >= s)).collect();
    Ok(ProbePair {
        single,
        double,
        probe_edge: first,
        community,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn er_extremes() {
        let mut rng = Rng::new(0);
        assert_eq!(sample_er(3, 0.0, false, &mut rng).unwrap().num_edges(), 0);
        assert_eq!(sample_er(3, 1.0, false, &mut rng).unwrap().num_edges(), 3);
        assert_eq!(sample_er(3, 1.0, true, &mut rng).unwrap().num_edges(), 6);
        assert!(sample_er(3, 1.5, false, &mut rng).is_err());
        assert!(sample_er(3, -0.1, false, &mut rng).is_err());
    }

    #[test]
    fn er_is_deterministic() {
        let a = sample_er(20, 0.3, true, &mut Rng::new(11)).unwrap();
        let b = sample_er(20, 0.3, true, &mut Rng::new(11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn k_regular_degrees() {
        let mut rng = Rng::new(5);
        for &(n, k) in &[(16, 4), (32, 8), (32, 4), (10, 3), (64, 4)] {
            let g = sample_k_regular(n, k, &mut rng).unwrap();
            assert!(g.degrees().iter().all(|&d| d == k), "n={n} k={k}");
            assert_eq!(g.num_edges(), n * k / 2);
        }
    }

    #[test]
    fn k_regular_k4_on_4_nodes_is_complete() {
        let g = sample_k_regular(4, 3, &mut Rng::new(2)).unwrap();
        assert_eq!(g.num_edges(), 6);
    }

    #[test]
    fn k_regular_rejects_bad_params() {
        let mut rng = Rng::new(0);
        assert!(sample_k_regular(5, 3, &mut rng).is_err());
        assert!(sample_k_regular(4, 4, &mut rng).is_err());
    }

    #[test]
    fn probe_pair_smallest() {
        let pair = sample_two_community_pair(2, 1.0, &mut Rng::new(4)).unwrap();
        assert_eq!(pair.single.num_edges(), 3);
        assert_eq!(pair.double.num_edges(), 4);
        assert_eq!(pair.single.n(), pair.double.n());
        let (u, v) = pair.probe_edge;
        assert_ne!(pair.community[u], pair.community[v]);
        assert!(sample_two_community_pair(1, 0.5, &mut Rng::new(0)).is_err());
    }
}
