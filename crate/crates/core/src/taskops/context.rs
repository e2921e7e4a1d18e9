use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{neighbor_set, require, TaskError};
use crate::graph::KnowledgeGraph;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdeaContext {
    pub nodes: Vec<String>,
    /// `(src, label, dst)` for every edge inside the neighborhood.
    pub triples: Vec<(String, String, String)>,
    pub digest: String,
}

/// The undirected `radius`-neighborhood of `concepts`, rendered as a stable
/// text block: nodes first, then triples, both id-sorted.
pub fn idea_context(g: &KnowledgeGraph, concepts: &[String], radius: u32) -> Result<IdeaContext, TaskError> {
    if !(1..=2).contains(&radius) {
        return Err(TaskError::InvalidRadius(radius));
    }
    for c in concepts {
        require(g, c)?;
    }
    let mut seen: BTreeSet<String> = concepts.iter().cloned().collect();
    let mut queue: VecDeque<(String, u32)> = seen.iter().map(|c| (c.clone(), 0)).collect();
    while let Some((u, d)) = queue.pop_front() {
        if d == radius {
            continue;
        }
        for v in neighbor_set(g, &u) {
            if seen.insert(v.clone()) {
                queue.push_back((v, d + 1));
            }
        }
    }
    let mut edges: Vec<_> = g
        .edges()
        .filter(|e| seen.contains(&e.src) && seen.contains(&e.dst))
        .collect();
    edges.sort_by(|a, b| (&a.src, &a.label, &a.dst, &a.id).cmp(&(&b.src, &b.label, &b.dst, &b.id)));
    let triples: Vec<(String, String, String)> = edges
        .iter()
        .map(|e| (e.src.clone(), e.label.clone(), e.dst.clone()))
        .collect();

    let mut digest = String::from("Nodes:\n");
    for id in &seen {
        let n = g.node(id).expect("node in neighborhood");
        let labels = if n.labels.is_empty() {
            String::new()
        } else {
            format!(" :{}", n.labels.join(":"))
        };
        let name = n.display_name();
        if name == id {
            let _ = writeln!(digest, "- {id}{labels}");
        } else {
            let _ = writeln!(digest, "- {id}{labels} \"{name}\"");
        }
    }
    digest.push_str("Triples:\n");
    for (s, l, d) in &triples {
        let _ = writeln!(digest, "- ({s})-[:{l}]->({d})");
    }
    Ok(IdeaContext {
        nodes: seen.into_iter().collect(),
        triples,
        digest,
    })
}
