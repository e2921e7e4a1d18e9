//! Matrix-based reference implementations for the task algorithms, plus
//! seeded sweeps that count disagreements with the library.

use kgpilot_core::graph::KnowledgeGraph;
use kgpilot_core::taskops::{self, TaskError};
use rand::Rng;

use super::graphs::{node_id, random_digraph, rng};

const INF: usize = usize::MAX / 4;

/// `adj[i][j]` is true when some edge runs from node i to node j.
pub fn adjacency(g: &KnowledgeGraph, n: usize, undirected: bool) -> Vec<Vec<bool>> {
    let mut adj = vec![vec![false; n]; n];
    for e in g.edges() {
        let s: usize = e.src[1..].parse().unwrap();
        let d: usize = e.dst[1..].parse().unwrap();
        if s != d {
            adj[s][d] = true;
            if undirected {
                adj[d][s] = true;
            }
        }
    }
    adj
}

pub fn floyd_warshall(adj: &[Vec<bool>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut d = vec![vec![INF; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        for j in 0..n {
            if adj[i][j] {
                d[i][j] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

/// Queue-based BFS over the matrix in index order; the first discoverer is
/// the parent.
pub fn bfs_path(adj: &[Vec<bool>], s: usize, t: usize) -> Option<Vec<usize>> {
    let n = adj.len();
    let mut parent = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    seen[s] = true;
    let mut queue = std::collections::VecDeque::from([s]);
    while let Some(u) = queue.pop_front() {
        if u == t {
            break;
        }
        for v in 0..n {
            if adj[u][v] && !seen[v] {
                seen[v] = true;
                parent[v] = u;
                queue.push_back(v);
            }
        }
    }
    if !seen[t] {
        return None;
    }
    let mut path = vec![t];
    while *path.last().unwrap() != s {
        path.push(parent[*path.last().unwrap()]);
    }
    path.reverse();
    Some(path)
}

/// Boolean transitive closure (Warshall).
pub fn closure(adj: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let n = adj.len();
    let mut r = adj.to_vec();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                r[i][j] = r[i][j] || (r[i][k] && r[k][j]);
            }
        }
    }
    r
}

/// Every non-adjacent pair in the region, scored exhaustively and sorted.
pub fn score_non_edges(adj: &[Vec<bool>], focus: &[usize]) -> Vec<(usize, usize, usize, f64)> {
    let n = adj.len();
    let mut in_region = vec![false; n];
    for &f in focus {
        in_region[f] = true;
        for j in 0..n {
            if adj[f][j] {
                in_region[j] = true;
            }
        }
    }
    let deg: Vec<usize> = (0..n).map(|i| (0..n).filter(|&j| adj[i][j]).count()).collect();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if !in_region[i] || !in_region[j] || adj[i][j] {
                continue;
            }
            let mut cn = 0;
            let mut aa = 0.0;
            for z in 0..n {
                if adj[i][z] && adj[j][z] {
                    cn += 1;
                    if deg[z] >= 2 {
                        aa += 1.0 / (deg[z] as f64).ln();
                    }
                }
            }
            out.push((i, j, cn, aa));
        }
    }
    out.sort_by(|a, b| {
        b.2.cmp(&a.2)
            .then(b.3.partial_cmp(&a.3).unwrap())
            .then((a.0, a.1).cmp(&(b.0, b.1)))
    });
    out
}

fn index(id: &str) -> usize {
    id[1..].parse().unwrap()
}

/// find_path vs Floyd–Warshall hop distances and the matrix BFS path, over
/// every ordered pair of `cases` random graphs. Returns mismatches.
pub fn path_sweep(cases: u64, seed: u64) -> usize {
    let mut mismatches = 0;
    for case in 0..cases {
        let mut r = rng(seed.wrapping_add(case));
        let n = r.random_range(1..=12);
        let p = r.random_range(0.05..0.4);
        let undirected = r.random_bool(0.5);
        let g = random_digraph(&mut r, n, p, "r", false);
        let version = g.version();
        let adj = adjacency(&g, n, undirected);
        let dist = floyd_warshall(&adj);
        for s in 0..n {
            for t in 0..n {
                let got = taskops::find_path(&g, &node_id(s), &node_id(t), undirected);
                let ok = match (got, bfs_path(&adj, s, t)) {
                    (Ok(p), Some(want)) => {
                        p.length == dist[s][t]
                            && p.nodes.iter().map(|x| index(x)).collect::<Vec<_>>() == want
                            && p.edges.len() == p.length
                    }
                    (Err(TaskError::NoPath { .. }), None) => dist[s][t] >= INF,
                    _ => false,
                };
                if !ok {
                    mismatches += 1;
                }
            }
        }
        if g.version() != version {
            mismatches += 1;
        }
    }
    mismatches
}

/// prerequisites vs boolean closure on random DAGs, every node as target.
pub fn prerequisite_sweep(cases: u64, seed: u64) -> usize {
    let mut mismatches = 0;
    for case in 0..cases {
        let mut r = rng(seed.wrapping_add(case));
        let n = r.random_range(1..=10);
        let p = r.random_range(0.1..0.5);
        let g = random_digraph(&mut r, n, p, "prerequisite_of", true);
        let adj = adjacency(&g, n, false);
        let reach = closure(&adj);
        let dist = floyd_warshall(&adj);
        for t in 0..n {
            let got = taskops::prerequisites(&g, &node_id(t), "prerequisite_of").unwrap();
            let mut want: Vec<usize> = (0..n).filter(|&i| i != t && reach[i][t]).collect();
            want.sort_by_key(|&i| (dist[i][t], i));
            let got_idx: Vec<usize> = got.nodes.iter().map(|x| index(x)).collect();
            if got_idx != want || got.cycle.is_some() {
                mismatches += 1;
            }
        }
    }
    mismatches
}

/// complete_subgraph top-k vs exhaustive non-edge scoring.
pub fn link_sweep(cases: u64, seed: u64) -> usize {
    let mut mismatches = 0;
    for case in 0..cases {
        let mut r = rng(seed.wrapping_add(case));
        let n = r.random_range(2..=10);
        let p = r.random_range(0.1..0.5);
        let g = random_digraph(&mut r, n, p, "related_to", false);
        let focus: Vec<usize> = (0..n).filter(|_| r.random_bool(0.4)).collect();
        let focus = if focus.is_empty() { vec![0] } else { focus };
        let k = r.random_range(1..=5);
        let adj = adjacency(&g, n, true);
        let want: Vec<(usize, usize, usize, f64)> = score_non_edges(&adj, &focus).into_iter().take(k).collect();
        let ids: Vec<String> = focus.iter().map(|&i| node_id(i)).collect();
        let got = taskops::complete_subgraph(&g, &ids, k).unwrap();
        let got: Vec<(usize, usize, usize, f64)> = got
            .iter()
            .map(|c| (index(&c.src), index(&c.dst), c.score as usize, c.adamic_adar))
            .collect();
        if got != want {
            mismatches += 1;
        }
    }
    mismatches
}
