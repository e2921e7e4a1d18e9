use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{neighbor_set, TaskError};
use crate::graph::{KnowledgeGraph, Value};

pub const MAX_ROUNDS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSet {
    /// Each cluster is id-sorted; clusters are ordered by size descending,
    /// then smallest member.
    pub clusters: Vec<Vec<String>>,
    /// `label_propagation` or `connected_components` (no convergence).
    pub method: String,
    pub rounds: usize,
}

fn selected(g: &KnowledgeGraph, filter: Option<&str>) -> BTreeSet<String> {
    g.nodes()
        .filter(|n| match filter {
            None => true,
            Some(f) => n.has_label(f) || n.props.get("domain").and_then(Value::as_str) == Some(f),
        })
        .map(|n| n.id.clone())
        .collect()
}

/// Synchronous label propagation on the undirected subgraph induced by the
/// nodes carrying label (or `domain` property) `filter`.
pub fn cluster(g: &KnowledgeGraph, filter: Option<&str>) -> Result<ClusterSet, TaskError> {
    let nodes = selected(g, filter);
    if nodes.is_empty() {
        return Err(TaskError::EmptySelection);
    }
    let adj: BTreeMap<&str, Vec<&str>> = nodes
        .iter()
        .map(|n| {
            let ns = neighbor_set(g, n);
            let inside = nodes.iter().filter(|m| ns.contains(*m)).map(String::as_str).collect();
            (n.as_str(), inside)
        })
        .collect();

    let mut labels: BTreeMap<&str, &str> = nodes.iter().map(|n| (n.as_str(), n.as_str())).collect();
    for round in 1..=MAX_ROUNDS {
        let next: BTreeMap<&str, &str> = adj
            .iter()
            .map(|(&n, ns)| {
                if ns.is_empty() {
                    return (n, labels[n]);
                }
                let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                for m in ns {
                    *counts.entry(labels[m]).or_default() += 1;
                }
                let best = counts.values().copied().max().unwrap();
                // BTreeMap iteration yields the smallest label among the tied.
                let pick = counts.into_iter().find(|(_, c)| *c == best).unwrap().0;
                (n, pick)
            })
            .collect();
        if next == labels {
            return Ok(finish(group(&labels), "label_propagation", round));
        }
        labels = next;
    }
    Ok(finish(components(&adj), "connected_components", MAX_ROUNDS))
}

fn group(labels: &BTreeMap<&str, &str>) -> Vec<Vec<String>> {
    let mut by: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for (n, l) in labels {
        by.entry(l).or_default().push(n.to_string());
    }
    by.into_values().collect()
}

fn components(adj: &BTreeMap<&str, Vec<&str>>) -> Vec<Vec<String>> {
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut out = Vec::new();
    for &start in adj.keys() {
        if !seen.insert(start) {
            continue;
        }
        let mut comp = vec![start.to_string()];
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if seen.insert(v) {
                    comp.push(v.to_string());
                    stack.push(v);
                }
            }
        }
        out.push(comp);
    }
    out
}

fn finish(mut clusters: Vec<Vec<String>>, method: &str, rounds: usize) -> ClusterSet {
    for c in &mut clusters {
        c.sort();
    }
    clusters.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a[0].cmp(&b[0])));
    ClusterSet {
        clusters,
        method: method.to_string(),
        rounds,
    }
}
