use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{neighbor_set, require, TaskError};
use crate::graph::KnowledgeGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkCandidate {
    pub src: String,
    pub dst: String,
    /// Common-neighbor count.
    pub score: f64,
    pub adamic_adar: f64,
    pub evidence: Vec<String>,
}

/// Scores every unlinked pair in `focus` plus its one-hop neighborhood by
/// common neighbors, breaking ties by Adamic–Adar and then by the pair.
/// Adjacency is undirected over the whole graph.
pub fn complete_subgraph(g: &KnowledgeGraph, focus: &[String], k: usize) -> Result<Vec<LinkCandidate>, TaskError> {
    if k == 0 {
        return Err(TaskError::InvalidK);
    }
    for f in focus {
        require(g, f)?;
    }
    let mut adj: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut neighbors =
        |id: &str| -> BTreeSet<String> { adj.entry(id.to_string()).or_insert_with(|| neighbor_set(g, id)).clone() };
    let mut region: BTreeSet<String> = focus.iter().cloned().collect();
    for f in focus {
        region.extend(neighbors(f));
    }
    let region: Vec<String> = region.into_iter().collect();
    let mut out = Vec::new();
    for (i, u) in region.iter().enumerate() {
        let nu = neighbors(u);
        for v in &region[i + 1..] {
            if nu.contains(v) {
                continue;
            }
            let nv = neighbors(v);
            let common: Vec<String> = nu.intersection(&nv).cloned().collect();
            let adamic_adar = common
                .iter()
                .map(|z| neighbors(z).len())
                .filter(|&d| d >= 2)
                .map(|d| 1.0 / (d as f64).ln())
                .sum();
            out.push(LinkCandidate {
                src: u.clone(),
                dst: v.clone(),
                score: common.len() as f64,
                adamic_adar,
                evidence: common,
            });
        }
    }
    out.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| b.adamic_adar.partial_cmp(&a.adamic_adar).unwrap_or(Ordering::Equal))
            .then_with(|| (&a.src, &a.dst).cmp(&(&b.src, &b.dst)))
    });
    out.truncate(k);
    Ok(out)
}
