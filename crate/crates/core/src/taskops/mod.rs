//! Deterministic graph algorithms behind the predefined task types. Every
//! tie is broken by lexicographic node id.

mod cluster;
mod context;
mod links;
mod paths;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::graph::KnowledgeGraph;

pub use cluster::{cluster, ClusterSet, MAX_ROUNDS};
pub use context::{idea_context, IdeaContext};
pub use links::{complete_subgraph, LinkCandidate};
pub use paths::{
    find_path, judge_relation, prerequisites, PathResult, Prerequisites, RelationJudgment, RelationVerdict,
    JUDGE_MAX_HOPS, JUDGE_MAX_PATHS,
};

pub const DEFAULT_PREREQ_RELATION: &str = "prerequisite_of";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
pub enum TaskError {
    #[error("unknown node '{0}'")]
    UnknownId(String),
    #[error("a concept cannot be compared with itself")]
    SelfComparison,
    #[error("no path from '{from}' to '{to}'")]
    NoPath { from: String, to: String },
    #[error("no nodes selected")]
    EmptySelection,
    #[error("radius must be 1 or 2, got {0}")]
    InvalidRadius(u32),
    #[error("k must be at least 1")]
    InvalidK,
}

fn require(g: &KnowledgeGraph, id: &str) -> Result<(), TaskError> {
    if g.contains_node(id) {
        Ok(())
    } else {
        Err(TaskError::UnknownId(id.to_string()))
    }
}

/// Neighbors reachable in one step, each with the smallest edge id that
/// realizes the step. Self-loops are ignored.
fn steps(g: &KnowledgeGraph, id: &str, undirected: bool, label: Option<&str>) -> BTreeMap<String, String> {
    let mut out: BTreeMap<String, String> = BTreeMap::new();
    let keep = |l: &str| label.is_none_or(|want| want == l);
    let mut add = |other: &str, edge: &str| {
        if other == id {
            return;
        }
        let slot = out.entry(other.to_string()).or_insert_with(|| edge.to_string());
        if edge < slot.as_str() {
            *slot = edge.to_string();
        }
    };
    for e in g.out_edges(id).filter(|e| keep(&e.label)) {
        add(&e.dst, &e.id);
    }
    if undirected {
        for e in g.in_edges(id).filter(|e| keep(&e.label)) {
            add(&e.src, &e.id);
        }
    }
    out
}

/// Undirected simple neighbor set.
fn neighbor_set(g: &KnowledgeGraph, id: &str) -> BTreeSet<String> {
    steps(g, id, true, None).into_keys().collect()
}
