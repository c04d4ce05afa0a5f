use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use super::{Labels, OutputKind};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Parent pointers of a breadth-first search from `start`.
///
/// A reached node points to its lowest-index neighbor one level closer to the
/// start.
pub fn bfs_parents(g: &Graph, start: usize) -> Result<Labels> {
    check_node(g, start)?;
    let out = g.out_adjacency();
    let mut depth = vec![usize::MAX; g.n()];
    depth[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &(v, _) in &out[u] {
            if depth[v] == usize::MAX {
                depth[v] = depth[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let inc = g.in_adjacency();
    let parents = (0..g.n())
        .map(|v| {
            if v == start || depth[v] == usize::MAX {
                return v;
            }
            inc[v]
                .iter()
                .map(|&(u, _)| u)
                .find(|&u| depth[u] != usize::MAX && depth[u] + 1 == depth[v])
                .expect("reached node has a parent one level up")
        })
        .collect();
    Ok(Labels::new(OutputKind::NodePointer, parents))
}

/// Depth-first forest: each tree starts at the lowest-index unvisited node and
/// always expands the lowest-index unexplored out-neighbor.
pub fn dfs_forest(g: &Graph) -> Labels {
    let out = g.out_adjacency();
    let mut parent: Vec<Option<usize>> = vec![None; g.n()];
    for root in 0..g.n() {
        if parent[root].is_some() {
            continue;
        }
        parent[root] = Some(root);
        // (node, cursor into its sorted neighbor list)
        let mut stack = vec![(root, 0usize)];
        while let Some(top) = stack.last_mut() {
            let (u, cursor) = *top;
            match out[u][cursor..].iter().position(|&(v, _)| parent[v].is_none()) {
                Some(off) => {
                    let v = out[u][cursor + off].0;
                    top.1 = cursor + off + 1;
                    parent[v] = Some(u);
                    stack.push((v, 0));
                }
                None => {
                    stack.pop();
                }
            }
        }
    }
    Labels::new(
        OutputKind::NodePointer,
        parent.into_iter().map(|p| p.expect("all visited")).collect(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShortestPathMode {
    BellmanFord,
    Dag,
    FloydWarshall,
}

/// Shortest-path predecessor labels.
///
/// Single-source modes return one pointer per node. Floyd–Warshall returns a
/// row-major `n x n` table whose entry `(i, j)` is the predecessor of `j` on a
/// shortest `i -> j` path; unreachable and diagonal entries hold `j`.
pub fn shortest_paths(g: &Graph, mode: ShortestPathMode, source: Option<usize>) -> Result<Labels> {
    let w = g.dense_weights();
    match mode {
        ShortestPathMode::FloydWarshall => {
            let n = g.n();
            let mut dist = vec![vec![f64::INFINITY; n]; n];
            for i in 0..n {
                dist[i][i] = 0.0;
                for j in 0..n {
                    if let Some(x) = w[i][j] {
                        dist[i][j] = dist[i][j].min(x);
                    }
                }
            }
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let via = dist[i][k] + dist[k][j];
                        if via < dist[i][j] {
                            dist[i][j] = via;
                        }
                    }
                }
            }
            let mut table = Vec::with_capacity(n * n);
            for (i, row) in dist.iter().enumerate() {
                let mut pred = predecessors(row, &w);
                pred[i] = i;
                table.extend(pred);
            }
            Ok(Labels::new(OutputKind::PairPointer, table))
        }
        ShortestPathMode::BellmanFord | ShortestPathMode::Dag => {
            let s = source.ok_or_else(|| Error::Parameter("single-source mode needs a source".into()))?;
            check_node(g, s)?;
            let mut dist = vec![f64::INFINITY; g.n()];
            dist[s] = 0.0;
            let arcs = arc_list(g);
            if mode == ShortestPathMode::Dag {
                let order = kahn_order(g)?;
                let out = g.out_adjacency();
                for u in order {
                    if dist[u].is_finite() {
                        for &(v, e) in &out[u] {
                            let cand = dist[u] + g.edges()[e].weight;
                            if cand < dist[v] {
                                dist[v] = cand;
                            }
                        }
                    }
                }
            } else {
                for _ in 1..g.n() {
                    let mut changed = false;
                    for &(u, v, x) in &arcs {
                        if dist[u] + x < dist[v] {
                            dist[v] = dist[u] + x;
                            changed = true;
                        }
                    }
                    if !changed {
                        break;
                    }
                }
            }
            let mut pred = predecessors(&dist, &w);
            pred[s] = s;
            Ok(Labels::new(OutputKind::NodePointer, pred))
        }
    }
}

/// For each node `v`, the lowest-index `u` minimizing `dist[u] + w(u, v)`
/// (within rounding). Unreachable nodes get `v` itself; the caller patches
/// the source entry.
fn predecessors(dist: &[f64], w: &[Vec<Option<f64>>]) -> Vec<usize> {
    let n = dist.len();
    (0..n)
        .map(|v| {
            if !dist[v].is_finite() {
                return v;
            }
            let cands: Vec<(usize, f64)> = (0..n)
                .filter(|&u| u != v && dist[u].is_finite())
                .filter_map(|u| w[u][v].map(|x| (u, dist[u] + x)))
                .collect();
            let best = cands.iter().map(|&(_, c)| c).fold(f64::INFINITY, f64::min);
            cands
                .iter()
                .find(|&&(_, c)| super::near(c, best))
                .map_or(v, |&(u, _)| u)
        })
        .collect()
}

fn arc_list(g: &Graph) -> Vec<(usize, usize, f64)> {
    let mut arcs = Vec::with_capacity(2 * g.num_edges());
    for e in g.edges() {
        arcs.push((e.u, e.v, e.weight));
        if !g.directed() {
            arcs.push((e.v, e.u, e.weight));
        }
    }
    arcs
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MstMode {
    Prim,
    Kruskal,
}

/// Minimum spanning forest as an edge mask over `g.edges()`.
///
/// Prim grows from `start`, then restarts at the lowest-index unvisited node
/// for each further component. Ties go to the lexicographically smallest
/// `(u, v)`.
pub fn mst(g: &Graph, mode: MstMode, start: usize) -> Result<Labels> {
    check_node(g, start)?;
    let m = g.num_edges();
    let mut mask = vec![0usize; m];
    let key = |e: usize| {
        let ed = g.edges()[e];
        (ed.weight, ed.u.min(ed.v), ed.u.max(ed.v))
    };
    match mode {
        MstMode::Kruskal => {
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| key(a).partial_cmp(&key(b)).expect("finite weights"));
            let mut parent: Vec<usize> = (0..g.n()).collect();
            fn find(p: &mut [usize], mut x: usize) -> usize {
                while p[x] != x {
                    p[x] = p[p[x]];
                    x = p[x];
                }
                x
            }
            for e in order {
                let ed = g.edges()[e];
                let (a, b) = (find(&mut parent, ed.u), find(&mut parent, ed.v));
                if a != b {
                    parent[a] = b;
                    mask[e] = 1;
                }
            }
        }
        MstMode::Prim => {
            let adj = g.out_adjacency();
            let both = if g.directed() {
                // Treat arcs as undirected for spanning purposes.
                let mut a = adj.clone();
                for (v, list) in g.in_adjacency().into_iter().enumerate() {
                    a[v].extend(list);
                }
                a
            } else {
                adj
            };
            let mut in_tree = vec![false; g.n()];
            let roots = std::iter::once(start).chain(0..g.n());
            for root in roots {
                if in_tree[root] {
                    continue;
                }
                in_tree[root] = true;
                loop {
                    let best = (0..g.n())
                        .filter(|&u| in_tree[u])
                        .flat_map(|u| both[u].iter().copied())
                        .filter(|&(v, _)| !in_tree[v])
                        .min_by(|&(_, a), &(_, b)| key(a).partial_cmp(&key(b)).expect("finite"));
                    match best {
                        Some((v, e)) => {
                            in_tree[v] = true;
                            mask[e] = 1;
                        }
                        None => break,
                    }
                }
            }
        }
    }
    Ok(Labels::new(OutputKind::EdgeMask, mask))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StructureMode {
    Topological,
    Scc,
    Bridges,
}

pub fn structure(g: &Graph, mode: StructureMode) -> Result<Labels> {
    match mode {
        StructureMode::Topological => {
            let order = kahn_order(g)?;
            let mut ptr = vec![0; g.n()];
            ptr[order[0]] = order[0];
            for w in order.windows(2) {
                ptr[w[1]] = w[0];
            }
            Ok(Labels::new(OutputKind::NodePointer, ptr))
        }
        StructureMode::Scc => Ok(Labels::new(OutputKind::NodePointer, scc_representatives(g))),
        StructureMode::Bridges => Ok(Labels::new(OutputKind::EdgeMask, bridge_mask(g))),
    }
}

/// Kahn's algorithm with a lowest-index-first ready queue.
fn kahn_order(g: &Graph) -> Result<Vec<usize>> {
    if !g.directed() {
        return Err(Error::Input("topological order needs a directed graph".into()));
    }
    let mut indeg = vec![0usize; g.n()];
    for e in g.edges() {
        indeg[e.v] += 1;
    }
    let out = g.out_adjacency();
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..g.n()).filter(|&v| indeg[v] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(g.n());
    while let Some(Reverse(u)) = ready.pop() {
        order.push(u);
        for &(v, _) in &out[u] {
            indeg[v] -= 1;
            if indeg[v] == 0 {
                ready.push(Reverse(v));
            }
        }
    }
    if order.len() != g.n() {
        return Err(Error::Input("graph has a cycle".into()));
    }
    Ok(order)
}

/// Tarjan's SCC; each node maps to the smallest id in its component.
fn scc_representatives(g: &Graph) -> Vec<usize> {
    let n = g.n();
    let out = g.out_adjacency();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut rep = vec![usize::MAX; n];
    let mut counter = 0;

    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (u, ref mut cursor)) = call.last_mut() {
            if *cursor < out[u].len() {
                let v = out[u][*cursor].0;
                *cursor += 1;
                if index[v] == usize::MAX {
                    index[v] = counter;
                    low[v] = counter;
                    counter += 1;
                    stack.push(v);
                    on_stack[v] = true;
                    call.push((v, 0));
                } else if on_stack[v] {
                    low[u] = low[u].min(index[v]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[u]);
                }
                if low[u] == index[u] {
                    let mut members = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        members.push(w);
                        if w == u {
                            break;
                        }
                    }
                    let r = *members.iter().min().expect("nonempty component");
                    for w in members {
                        rep[w] = r;
                    }
                }
            }
        }
    }
    rep
}

/// Bridges via low-link values on the undirected view of `g`.
fn bridge_mask(g: &Graph) -> Vec<usize> {
    let n = g.n();
    let mut adj = vec![Vec::new(); n];
    for (i, e) in g.edges().iter().enumerate() {
        adj[e.u].push((e.v, i));
        adj[e.v].push((e.u, i));
    }
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut mask = vec![0; g.num_edges()];
    let mut timer = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        // (node, edge used to enter, cursor)
        let mut call: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        while let Some(top) = call.last_mut() {
            let (u, via, cursor) = *top;
            if cursor < adj[u].len() {
                top.2 += 1;
                let (v, e) = adj[u][cursor];
                if e == via {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    call.push((v, e, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                call.pop();
                if let Some(&(p, _, _)) = call.last() {
                    low[p] = low[p].min(low[u]);
                    if low[u] > disc[p] {
                        mask[via] = 1;
                    }
                }
            }
        }
    }
    mask
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SequenceMode {
    Sort,
    Kadane,
    Minimum,
}

pub fn sequence_oracle(values: &[f64], mode: SequenceMode) -> Result<Labels> {
    if values.is_empty() {
        return Err(Error::Input("empty sequence".into()));
    }
    match mode {
        SequenceMode::Sort => {
            let mut order: Vec<usize> = (0..values.len()).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
            let mut succ = vec![0; values.len()];
            for w in order.windows(2) {
                succ[w[0]] = w[1];
            }
            let last = *order.last().expect("nonempty");
            succ[last] = last;
            Ok(Labels::new(OutputKind::NodePointer, succ))
        }
        SequenceMode::Kadane => {
            let (mut best, mut best_span) = (values[0], (0, 0));
            let (mut cur, mut cur_start) = (values[0], 0);
            for (i, &x) in values.iter().enumerate().skip(1) {
                // Extending on cur == 0 keeps the earlier start on ties.
                if cur >= 0.0 {
                    cur += x;
                } else {
                    cur = x;
                    cur_start = i;
                }
                if cur > best {
                    best = cur;
                    best_span = (cur_start, i);
                }
            }
            Ok(Labels::new(OutputKind::GraphPointer, vec![best_span.0, best_span.1]))
        }
        SequenceMode::Minimum => {
            let argmin = values
                .iter()
                .enumerate()
                .fold(0, |best, (i, &x)| if x < values[best] { i } else { best });
            Ok(Labels::new(OutputKind::GraphPointer, vec![argmin]))
        }
    }
}

fn check_node(g: &Graph, v: usize) -> Result<()> {
    if v >= g.n() {
        return Err(Error::Parameter(format!("node {v} out of range for {} nodes", g.n())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ug(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::from_edges(n, false, edges.iter().map(|&(u, v)| (u, v, 1.0))).unwrap()
    }

    fn dg(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::from_edges(n, true, edges.iter().map(|&(u, v)| (u, v, 1.0))).unwrap()
    }

    #[test]
    fn bfs_examples() {
        assert_eq!(bfs_parents(&ug(3, &[(0, 1), (1, 2)]), 0).unwrap().values, vec![0, 0, 1]);
        assert_eq!(bfs_parents(&ug(1, &[]), 0).unwrap().values, vec![0]);
        // node 3 unreachable
        assert_eq!(bfs_parents(&ug(4, &[(0, 1), (0, 2)]), 0).unwrap().values, vec![0, 0, 0, 3]);
        assert!(bfs_parents(&ug(2, &[]), 2).is_err());
    }

    #[test]
    fn bfs_picks_lowest_index_parent() {
        // 0-2, 0-3, 2-1? make node 4 reachable via 3 and 2 at the same depth
        let g = ug(5, &[(0, 3), (0, 2), (3, 4), (2, 4), (1, 0)]);
        assert_eq!(bfs_parents(&g, 0).unwrap().values[4], 2);
    }

    #[test]
    fn dfs_examples() {
        let ring = ug(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]);
        assert_eq!(dfs_forest(&ring).values, vec![0, 0, 1, 2]);
        let broken = ug(4, &[(0, 1), (1, 2), (0, 3)]);
        assert_eq!(dfs_forest(&broken).values, vec![0, 0, 1, 0]);
        assert_eq!(dfs_forest(&ug(3, &[])).values, vec![0, 1, 2]);
    }

    #[test]
    fn shortest_path_examples() {
        let g = Graph::from_edges(3, true, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 3.0)]).unwrap();
        for mode in [ShortestPathMode::BellmanFord, ShortestPathMode::Dag] {
            assert_eq!(shortest_paths(&g, mode, Some(0)).unwrap().values, vec![0, 0, 1]);
        }
        let g = Graph::from_edges(3, true, [(0, 1, 1.0)]).unwrap();
        assert_eq!(
            shortest_paths(&g, ShortestPathMode::BellmanFord, Some(0)).unwrap().values,
            vec![0, 0, 2]
        );
        let cyc = dg(2, &[(0, 1), (1, 0)]);
        assert!(shortest_paths(&cyc, ShortestPathMode::Dag, Some(0)).is_err());
    }

    #[test]
    fn floyd_warshall_table() {
        let g = Graph::from_edges(3, true, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 3.0)]).unwrap();
        let t = shortest_paths(&g, ShortestPathMode::FloydWarshall, None).unwrap().values;
        // row 0: 0->0 self, 0->1 via 0, 0->2 via 1
        assert_eq!(&t[0..3], &[0, 0, 1]);
        // row 1: 1->0 unreachable (holds 0), diagonal, 1->2 via 1
        assert_eq!(&t[3..6], &[0, 1, 1]);
        // row 2: nothing reachable
        assert_eq!(&t[6..9], &[0, 1, 2]);
    }

    #[test]
    fn mst_examples() {
        let tri = Graph::from_edges(3, false, [(0, 1, 0.1), (1, 2, 0.2), (0, 2, 0.3)]).unwrap();
        for mode in [MstMode::Prim, MstMode::Kruskal] {
            assert_eq!(mst(&tri, mode, 0).unwrap().values, vec![1, 1, 0]);
        }
        let tree = ug(4, &[(0, 1), (1, 2), (1, 3)]);
        assert_eq!(mst(&tree, MstMode::Prim, 2).unwrap().values, vec![1, 1, 1]);
        let forest = ug(4, &[(0, 1), (2, 3)]);
        assert_eq!(mst(&forest, MstMode::Prim, 3).unwrap().values, vec![1, 1]);
    }

    #[test]
    fn structure_examples() {
        let dag = dg(3, &[(0, 2), (1, 2)]);
        assert_eq!(structure(&dag, StructureMode::Topological).unwrap().values, vec![0, 0, 1]);
        let cyc = dg(3, &[(0, 1), (1, 2), (2, 0)]);
        assert!(structure(&cyc, StructureMode::Topological).is_err());
        assert_eq!(structure(&cyc, StructureMode::Scc).unwrap().values, vec![0, 0, 0]);
        let two = dg(4, &[(1, 2), (2, 1), (0, 1), (3, 3 - 3)]);
        assert_eq!(structure(&two, StructureMode::Scc).unwrap().values, vec![0, 1, 1, 3]);
        let g = ug(4, &[(0, 1), (1, 2), (2, 0), (2, 3)]);
        assert_eq!(structure(&g, StructureMode::Bridges).unwrap().values, vec![0, 0, 0, 1]);
    }

    #[test]
    fn sequence_examples() {
        assert_eq!(sequence_oracle(&[0.5, 0.2, 0.9], SequenceMode::Sort).unwrap().values, vec![2, 0, 2]);
        assert_eq!(sequence_oracle(&[1.0, -2.0, 3.0, 4.0], SequenceMode::Kadane).unwrap().values, vec![2, 3]);
        assert_eq!(sequence_oracle(&[0.3, 0.1, 0.7], SequenceMode::Minimum).unwrap().values, vec![1]);
        assert!(sequence_oracle(&[], SequenceMode::Sort).is_err());
        assert_eq!(sequence_oracle(&[-3.0, -1.0, -2.0], SequenceMode::Kadane).unwrap().values, vec![1, 1]);
    }
}
