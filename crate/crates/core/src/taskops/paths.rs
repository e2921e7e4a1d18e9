use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{require, steps, TaskError};
use crate::graph::{EdgeRecord, KnowledgeGraph};

pub const JUDGE_MAX_HOPS: usize = 4;
pub const JUDGE_MAX_PATHS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathResult {
    pub nodes: Vec<String>,
    pub edges: Vec<String>,
    pub length: usize,
}

impl PathResult {
    fn from_nodes(g: &KnowledgeGraph, nodes: Vec<String>, undirected: bool) -> Self {
        let edges = nodes
            .windows(2)
            .map(|w| steps(g, &w[0], undirected, None)[&w[1]].clone())
            .collect();
        PathResult {
            length: nodes.len() - 1,
            nodes,
            edges,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationVerdict {
    Direct,
    Indirect,
    NoRelation,
}

impl fmt::Display for RelationVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelationVerdict::Direct => "directly related",
            RelationVerdict::Indirect => "indirectly related",
            RelationVerdict::NoRelation => "no relation found",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationJudgment {
    pub direct_edges: Vec<EdgeRecord>,
    pub connecting_paths: Vec<PathResult>,
    pub verdict: RelationVerdict,
}

/// Edges between `a` and `b` in either direction; failing that, up to three
/// shortest undirected paths of at most four hops.
pub fn judge_relation(g: &KnowledgeGraph, a: &str, b: &str) -> Result<RelationJudgment, TaskError> {
    require(g, a)?;
    require(g, b)?;
    if a == b {
        return Err(TaskError::SelfComparison);
    }
    let mut direct: Vec<EdgeRecord> = g
        .out_edges(a)
        .filter(|e| e.dst == b)
        .chain(g.in_edges(a).filter(|e| e.src == b))
        .cloned()
        .collect();
    direct.sort_by(|x, y| x.id.cmp(&y.id));
    if !direct.is_empty() {
        return Ok(RelationJudgment {
            direct_edges: direct,
            connecting_paths: Vec::new(),
            verdict: RelationVerdict::Direct,
        });
    }
    let paths = shortest_paths(g, a, b, JUDGE_MAX_HOPS, JUDGE_MAX_PATHS);
    let verdict = if paths.is_empty() {
        RelationVerdict::NoRelation
    } else {
        RelationVerdict::Indirect
    };
    Ok(RelationJudgment {
        direct_edges: Vec::new(),
        connecting_paths: paths,
        verdict,
    })
}

fn hop_distances(g: &KnowledgeGraph, from: &str, limit: usize) -> HashMap<String, usize> {
    let mut dist = HashMap::from([(from.to_string(), 0)]);
    let mut queue = VecDeque::from([from.to_string()]);
    while let Some(u) = queue.pop_front() {
        let d = dist[&u];
        if d == limit {
            continue;
        }
        for v in steps(g, &u, true, None).into_keys() {
            if !dist.contains_key(&v) {
                dist.insert(v.clone(), d + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// The lexicographically first `max` undirected shortest paths, if the
/// distance is within `limit`.
fn shortest_paths(g: &KnowledgeGraph, a: &str, b: &str, limit: usize, max: usize) -> Vec<PathResult> {
    let da = hop_distances(g, a, limit);
    let Some(&len) = da.get(b) else {
        return Vec::new();
    };
    let db = hop_distances(g, b, limit);
    let mut out = Vec::new();
    let mut stack = vec![a.to_string()];
    walk(g, &da, &db, len, &mut stack, max, &mut out);
    out.into_iter()
        .map(|nodes| PathResult::from_nodes(g, nodes, true))
        .collect()
}

fn walk(
    g: &KnowledgeGraph,
    da: &HashMap<String, usize>,
    db: &HashMap<String, usize>,
    len: usize,
    stack: &mut Vec<String>,
    max: usize,
    out: &mut Vec<Vec<String>>,
) {
    if out.len() == max {
        return;
    }
    let cur = stack.last().unwrap().clone();
    if db.get(&cur) == Some(&0) {
        out.push(stack.clone());
        return;
    }
    let here = da[&cur];
    for next in steps(g, &cur, true, None).into_keys() {
        let on_geodesic = da.get(&next) == Some(&(here + 1)) && db.get(&next).is_some_and(|d| here + 1 + d == len);
        if on_geodesic {
            stack.push(next);
            walk(g, da, db, len, stack, max, out);
            stack.pop();
        }
    }
}

/// Breadth-first hop-shortest path. Neighbors are expanded in id order and
/// the first discoverer becomes the parent, so the path is unique.
pub fn find_path(g: &KnowledgeGraph, start: &str, goal: &str, treat_undirected: bool) -> Result<PathResult, TaskError> {
    require(g, start)?;
    require(g, goal)?;
    let mut parent: HashMap<String, String> = HashMap::new();
    let mut seen: BTreeSet<String> = BTreeSet::from([start.to_string()]);
    let mut queue = VecDeque::from([start.to_string()]);
    while let Some(u) = queue.pop_front() {
        if u == goal {
            break;
        }
        for v in steps(g, &u, treat_undirected, None).into_keys() {
            if seen.insert(v.clone()) {
                parent.insert(v.clone(), u.clone());
                queue.push_back(v);
            }
        }
    }
    if !seen.contains(goal) {
        return Err(TaskError::NoPath {
            from: start.to_string(),
            to: goal.to_string(),
        });
    }
    let mut nodes = vec![goal.to_string()];
    while let Some(p) = parent.get(nodes.last().unwrap()) {
        nodes.push(p.clone());
    }
    nodes.reverse();
    Ok(PathResult::from_nodes(g, nodes, treat_undirected))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prerequisites {
    /// Ancestors ordered by (depth, id); nearest first.
    pub nodes: Vec<String>,
    pub depths: BTreeMap<String, usize>,
    /// A cycle among the ancestors, reported rather than followed.
    pub cycle: Option<Vec<String>>,
}

/// Everything that transitively points at `target` through `relation`
/// edges. An edge `x -[relation]-> y` reads "x is a prerequisite of y".
pub fn prerequisites(g: &KnowledgeGraph, target: &str, relation: &str) -> Result<Prerequisites, TaskError> {
    require(g, target)?;
    let mut depths: BTreeMap<String, usize> = BTreeMap::from([(target.to_string(), 0)]);
    let mut queue = VecDeque::from([target.to_string()]);
    while let Some(u) = queue.pop_front() {
        let d = depths[&u];
        let mut preds: Vec<&str> = g
            .in_edges(&u)
            .filter(|e| e.label == relation)
            .map(|e| e.src.as_str())
            .collect();
        preds.sort_unstable();
        for p in preds {
            if !depths.contains_key(p) {
                depths.insert(p.to_string(), d + 1);
                queue.push_back(p.to_string());
            }
        }
    }
    let cycle = find_cycle(g, &depths, relation);
    depths.remove(target);
    let mut nodes: Vec<String> = depths.keys().cloned().collect();
    nodes.sort_by(|x, y| depths[x].cmp(&depths[y]).then_with(|| x.cmp(y)));
    Ok(Prerequisites { nodes, depths, cycle })
}

/// First cycle found by an id-ordered DFS over the relation edges among
/// `within`.
fn find_cycle(g: &KnowledgeGraph, within: &BTreeMap<String, usize>, relation: &str) -> Option<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Grey,
        Black,
    }
    let succ = |u: &str| -> Vec<String> {
        let mut v: Vec<String> = g
            .out_edges(u)
            .filter(|e| e.label == relation && within.contains_key(&e.dst))
            .map(|e| e.dst.clone())
            .collect();
        v.sort();
        v.dedup();
        v
    };
    let mut color: HashMap<&str, Color> = within.keys().map(|k| (k.as_str(), Color::White)).collect();
    for root in within.keys() {
        if color[root.as_str()] != Color::White {
            continue;
        }
        let mut stack: Vec<(String, Vec<String>, usize)> = vec![(root.clone(), succ(root), 0)];
        color.insert(root, Color::Grey);
        while let Some((node, next, i)) = stack.last_mut() {
            if *i == next.len() {
                color.insert(within.get_key_value(node.as_str()).unwrap().0, Color::Black);
                stack.pop();
                continue;
            }
            let v = next[*i].clone();
            *i += 1;
            let key = within.get_key_value(v.as_str()).unwrap().0.as_str();
            match color[key] {
                Color::Grey => {
                    let start = stack.iter().position(|(n, _, _)| *n == v).unwrap();
                    return Some(stack[start..].iter().map(|(n, _, _)| n.clone()).collect());
                }
                Color::White => {
                    color.insert(key, Color::Grey);
                    let s = succ(&v);
                    stack.push((v, s, 0));
                }
                Color::Black => {}
            }
        }
    }
    None
}
