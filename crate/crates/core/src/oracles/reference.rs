//! Brute-force reference checks, written independently of the fast oracles.
//!
//! Each check enumerates the task's definition directly (hop-count matrix
//! powers, all simple paths, all spanning forests, all permutations, edge
//! removal recounts, all subarrays), so it is only usable on tiny inputs.

use super::{near, Labels};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::taskgen::TaskId;

/// Largest instance [`brute_force_check`] accepts.
pub const MAX_CHECK_NODES: usize = 8;

/// Task input as seen by the oracles.
#[derive(Clone, Copy, Debug)]
pub enum Problem<'a> {
    Graph { graph: &'a Graph, start: usize },
    Sequence(&'a [f64]),
}

impl Problem<'_> {
    pub fn size(&self) -> usize {
        match self {
            Problem::Graph { graph, .. } => graph.n(),
            Problem::Sequence(v) => v.len(),
        }
    }
}

/// `true` iff `labels` satisfy the definition of `task` on `problem`.
pub fn brute_force_check(task: TaskId, problem: &Problem<'_>, labels: &Labels) -> Result<bool> {
    let n = problem.size();
    if n > MAX_CHECK_NODES {
        return Err(Error::Parameter(format!(
            "brute-force check limited to {MAX_CHECK_NODES} nodes, got {n}"
        )));
    }
    if labels.kind != task.output_kind() {
        return Ok(false);
    }
    match (task, problem) {
        (TaskId::Quicksort, Problem::Sequence(v)) => Ok(check_sort(v, &labels.values)),
        (TaskId::FindMaximumSubarrayKadane, Problem::Sequence(v)) => Ok(check_kadane(v, &labels.values)),
        (TaskId::Minimum, Problem::Sequence(v)) => Ok(check_minimum(v, &labels.values)),
        (_, Problem::Graph { graph, start }) => {
            let ok = match task {
                TaskId::Bfs => check_bfs(graph, *start, &labels.values),
                TaskId::Dfs => labels.values == dfs_recursive(graph),
                TaskId::BellmanFord | TaskId::DagShortestPaths => {
                    check_single_source(graph, *start, &labels.values)
                }
                TaskId::FloydWarshall => check_all_pairs(graph, &labels.values),
                TaskId::MstPrim | TaskId::MstKruskal => check_spanning_forest(graph, &labels.values),
                TaskId::TopologicalSort => check_topological(graph, &labels.values),
                TaskId::StronglyConnectedComponents => check_scc(graph, &labels.values),
                TaskId::Bridges => check_bridges(graph, &labels.values),
                TaskId::Quicksort | TaskId::FindMaximumSubarrayKadane | TaskId::Minimum => {
                    return Err(Error::Input(format!("{task} expects a sequence")))
                }
            };
            Ok(ok)
        }
        (_, Problem::Sequence(_)) => Err(Error::Input(format!("{task} expects a graph"))),
    }
}

fn arc_matrix(g: &Graph) -> Vec<Vec<bool>> {
    g.dense_weights()
        .into_iter()
        .map(|row| row.into_iter().map(|w| w.is_some()).collect())
        .collect()
}

/// Hop distance from `start` by iterating boolean matrix-vector products.
fn hop_distances(g: &Graph, start: usize) -> Vec<Option<usize>> {
    let a = arc_matrix(g);
    let n = g.n();
    let mut dist = vec![None; n];
    let mut frontier = vec![false; n];
    frontier[start] = true;
    for k in 0..n {
        for v in 0..n {
            if frontier[v] && dist[v].is_none() {
                dist[v] = Some(k);
            }
        }
        // walks of length k + 1
        frontier = (0..n).map(|v| (0..n).any(|u| frontier[u] && a[u][v])).collect();
    }
    dist
}

fn check_bfs(g: &Graph, start: usize, parents: &[usize]) -> bool {
    let n = g.n();
    if parents.len() != n || start >= n {
        return false;
    }
    let a = arc_matrix(g);
    let dist = hop_distances(g, start);
    (0..n).all(|v| match dist[v] {
        None => parents[v] == v,
        Some(0) => parents[v] == v,
        Some(d) => {
            let expected = (0..n).find(|&u| a[u][v] && dist[u] == Some(d - 1));
            expected == Some(parents[v])
        }
    })
}

fn dfs_recursive(g: &Graph) -> Vec<usize> {
    fn visit(u: usize, a: &[Vec<bool>], parent: &mut [Option<usize>]) {
        for v in 0..a.len() {
            if a[u][v] && parent[v].is_none() {
                parent[v] = Some(u);
                visit(v, a, parent);
            }
        }
    }
    let a = arc_matrix(g);
    let mut parent = vec![None; g.n()];
    for r in 0..g.n() {
        if parent[r].is_none() {
            parent[r] = Some(r);
            visit(r, &a, &mut parent);
        }
    }
    parent.into_iter().map(|p| p.unwrap()).collect()
}

/// Cheapest simple-path cost from `s` to every node, by enumerating all simple paths.
fn path_costs(g: &Graph, s: usize) -> Vec<Option<f64>> {
    fn walk(u: usize, cost: f64, w: &[Vec<Option<f64>>], seen: &mut [bool], best: &mut [Option<f64>]) {
        if best[u].is_none_or(|b| cost < b) {
            best[u] = Some(cost);
        }
        for v in 0..w.len() {
            if let (false, Some(x)) = (seen[v], w[u][v]) {
                seen[v] = true;
                walk(v, cost + x, w, seen, best);
                seen[v] = false;
            }
        }
    }
    let w = g.dense_weights();
    let mut seen = vec![false; g.n()];
    seen[s] = true;
    let mut best = vec![None; g.n()];
    walk(s, 0.0, &w, &mut seen, &mut best);
    best
}

fn check_pointer_costs(g: &Graph, s: usize, pred: &[usize], cost: &[Option<f64>]) -> bool {
    let w = g.dense_weights();
    (0..g.n()).all(|v| {
        if v == s || cost[v].is_none() {
            return pred[v] == v;
        }
        let target = cost[v].unwrap();
        let expected = (0..g.n()).find(|&u| {
            u != v && matches!((cost[u], w[u][v]), (Some(c), Some(x)) if near(c + x, target))
        });
        expected == Some(pred[v])
    })
}

fn check_single_source(g: &Graph, s: usize, pred: &[usize]) -> bool {
    pred.len() == g.n() && s < g.n() && check_pointer_costs(g, s, pred, &path_costs(g, s))
}

fn check_all_pairs(g: &Graph, table: &[usize]) -> bool {
    let n = g.n();
    table.len() == n * n
        && (0..n).all(|i| check_pointer_costs(g, i, &table[i * n..(i + 1) * n], &path_costs(g, i)))
}

/// Mask must be a spanning forest whose weight equals the minimum over all
/// subsets of `n - components` edges that form a forest.
fn check_spanning_forest(g: &Graph, mask: &[usize]) -> bool {
    let m = g.num_edges();
    if mask.len() != m || mask.iter().any(|&b| b > 1) {
        return false;
    }
    let k = g.n() - g.count_components();
    let chosen: Vec<usize> = (0..m).filter(|&e| mask[e] == 1).collect();
    if chosen.len() != k || !is_forest(g, &chosen) {
        return false;
    }
    let weight = |set: &[usize]| set.iter().map(|&e| g.edges()[e].weight).sum::<f64>();
    let mut best = f64::INFINITY;
    let mut subset = Vec::with_capacity(k);
    fn each_subset(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for e in start..m {
            if m - e < k - cur.len() {
                break;
            }
            cur.push(e);
            each_subset(e + 1, m, k, cur, f);
            cur.pop();
        }
    }
    each_subset(0, m, k, &mut subset, &mut |s: &[usize]| {
        if is_forest(g, s) {
            best = best.min(weight(s));
        }
    });
    near(weight(&chosen), best)
}

fn is_forest(g: &Graph, edges: &[usize]) -> bool {
    // An edge set is acyclic iff adding its edges one by one always joins two
    // different labels; relabel naively to stay independent of union-find.
    let mut label: Vec<usize> = (0..g.n()).collect();
    for &e in edges {
        let ed = g.edges()[e];
        let (a, b) = (label[ed.u], label[ed.v]);
        if a == b {
            return false;
        }
        for l in label.iter_mut() {
            if *l == b {
                *l = a;
            }
        }
    }
    true
}

/// Pointers must encode the lexicographically smallest topological order.
fn check_topological(g: &Graph, ptr: &[usize]) -> bool {
    let n = g.n();
    if ptr.len() != n {
        return false;
    }
    let a = arc_matrix(g);
    let mut perm: Vec<usize> = (0..n).collect();
    let valid = |p: &[usize]| {
        let mut pos = vec![0; n];
        for (i, &v) in p.iter().enumerate() {
            pos[v] = i;
        }
        (0..n).all(|u| (0..n).all(|v| !a[u][v] || pos[u] < pos[v]))
    };
    // permutations in lexicographic order; the first valid one is the target
    loop {
        if valid(&perm) {
            let mut expected = vec![0; n];
            expected[perm[0]] = perm[0];
            for w in perm.windows(2) {
                expected[w[1]] = w[0];
            }
            return expected == ptr;
        }
        if !next_permutation(&mut perm) {
            return false;
        }
    }
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).unwrap();
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

fn check_scc(g: &Graph, reps: &[usize]) -> bool {
    let n = g.n();
    if reps.len() != n {
        return false;
    }
    let mut reach = arc_matrix(g);
    for (v, row) in reach.iter_mut().enumerate() {
        row[v] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    (0..n).all(|v| {
        let expected = (0..n).find(|&u| reach[u][v] && reach[v][u]).unwrap();
        reps[v] == expected
    })
}

fn check_bridges(g: &Graph, mask: &[usize]) -> bool {
    let base = g.count_components();
    mask.len() == g.num_edges()
        && (0..g.num_edges()).all(|e| {
            let is_bridge = g.without_edge(e).count_components() > base;
            mask[e] == usize::from(is_bridge)
        })
}

fn check_sort(v: &[f64], succ: &[usize]) -> bool {
    succ.len() == v.len()
        && (0..v.len()).all(|i| {
            let next = (0..v.len())
                .filter(|&j| v[j] > v[i])
                .min_by(|&a, &b| v[a].total_cmp(&v[b]));
            succ[i] == next.unwrap_or(i)
        })
}

fn check_kadane(v: &[f64], span: &[usize]) -> bool {
    let [s, e] = span else {
        return false;
    };
    if s > e || *e >= v.len() {
        return false;
    }
    let sum = |a: usize, b: usize| v[a..=b].iter().sum::<f64>();
    let best = (0..v.len())
        .flat_map(|a| (a..v.len()).map(move |b| (a, b)))
        .map(|(a, b)| sum(a, b))
        .fold(f64::NEG_INFINITY, f64::max);
    near(sum(*s, *e), best)
}

fn check_minimum(v: &[f64], sel: &[usize]) -> bool {
    match sel {
        [i] if *i < v.len() => v.iter().all(|&x| x >= v[*i]) && (0..*i).all(|j| v[j] > v[*i]),
        _ => false,
    }
}
