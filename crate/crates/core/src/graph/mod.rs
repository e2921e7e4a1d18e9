//! Embedded property graph.
//!
//! Nodes and edges live in id-ordered maps with adjacency and label indexes
//! on the side. Every mutation goes through [`KnowledgeGraph::mutate`], which
//! applies a batch all-or-nothing and bumps the version exactly once.

mod interchange;
mod store;
mod value;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use interchange::{export, export_to_string, import, import_str, InterchangeError};
pub use store::{GraphBackend, GraphStore};
pub use value::{Value, ValueKind};

pub type Props = BTreeMap<String, Value>;

static NEXT_LINEAGE: AtomicU64 = AtomicU64::new(1);

fn fresh_lineage() -> u64 {
    NEXT_LINEAGE.fetch_add(1, Ordering::Relaxed)
}

/// Normalizes a display name into a node id: case-fold, collapse
/// whitespace, spaces become underscores.
pub fn slugify(name: &str) -> String {
    name.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join("_")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: String,
    pub labels: Vec<String>,
    #[serde(default)]
    pub props: Props,
}

impl NodeRecord {
    pub fn new(id: impl Into<String>) -> Self {
        NodeRecord {
            id: id.into(),
            labels: Vec::new(),
            props: Props::new(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        let label = label.into();
        if !self.labels.contains(&label) {
            self.labels.push(label);
        }
        self
    }

    pub fn with_prop(mut self, key: impl Into<String>, value: impl Into<Value>) -> Self {
        self.props.insert(key.into(), value.into());
        self
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    /// The human-facing name: the `name` property when it is a string,
    /// otherwise the id.
    pub fn display_name(&self) -> &str {
        self.props.get("name").and_then(Value::as_str).unwrap_or(&self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub id: String,
    pub src: String,
    pub dst: String,
    pub label: String,
    #[serde(default)]
    pub props: Props,
}

impl EdgeRecord {
    pub fn new(
        id: impl Into<String>,
        src: impl Into<String>,
        label: impl Into<String>,
        dst: impl Into<String>,
    ) -> Self {
        EdgeRecord {
            id: id.into(),
            src: src.into(),
            dst: dst.into(),
            label: label.into(),
            props: Props::new(),
        }
    }

    pub fn with_prop(mut self, key: impl Into<String>, value: impl Into<Value>) -> Self {
        self.props.insert(key.into(), value.into());
        self
    }

    /// The endpoint opposite `node_id`.
    pub fn other(&self, node_id: &str) -> &str {
        if self.src == node_id {
            &self.dst
        } else {
            &self.src
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Mutation {
    CreateNode(NodeRecord),
    CreateEdge(EdgeRecord),
    DeleteNode { id: String },
    DeleteEdge { id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Out,
    In,
    Both,
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "out" => Ok(Direction::Out),
            "in" => Ok(Direction::In),
            "both" => Ok(Direction::Both),
            other => Err(format!("unknown direction '{other}' (expected out, in or both)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("mutation batch is empty")]
    EmptyBatch,
    #[error("edge '{edge}' references missing node '{node}'")]
    DanglingEndpoint { edge: String, node: String },
    #[error("duplicate id '{0}'")]
    DuplicateId(String),
    #[error("unknown id '{0}'")]
    UnknownId(String),
    #[error("invalid record '{id}': {reason}")]
    InvalidRecord { id: String, reason: String },
    #[error("snapshot belongs to a different graph")]
    LineageMismatch,
}

/// Optional schema hint: labels and relation types the graph is expected to use.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaHint {
    pub labels: Vec<String>,
    pub relation_types: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    nodes: BTreeMap<String, NodeRecord>,
    edges: BTreeMap<String, EdgeRecord>,
    out_index: HashMap<String, BTreeSet<String>>,
    in_index: HashMap<String, BTreeSet<String>>,
    label_index: HashMap<String, BTreeSet<String>>,
    version: u64,
    lineage: u64,
    pub schema_hint: Option<SchemaHint>,
}

impl Default for KnowledgeGraph {
    fn default() -> Self {
        Self::new()
    }
}

/// Equality is over node and edge content only; version, lineage and the
/// schema hint are bookkeeping.
impl PartialEq for KnowledgeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges
    }
}

impl Eq for KnowledgeGraph {}

enum Undo {
    RemoveNode(String),
    RemoveEdge(String),
    RestoreNode(NodeRecord),
    RestoreEdge(EdgeRecord),
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        KnowledgeGraph {
            nodes: BTreeMap::new(),
            edges: BTreeMap::new(),
            out_index: HashMap::new(),
            in_index: HashMap::new(),
            label_index: HashMap::new(),
            version: 0,
            lineage: fresh_lineage(),
            schema_hint: None,
        }
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn lineage(&self) -> u64 {
        self.lineage
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: &str) -> Option<&NodeRecord> {
        self.nodes.get(id)
    }

    pub fn edge(&self, id: &str) -> Option<&EdgeRecord> {
        self.edges.get(id)
    }

    pub fn contains_node(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }

    /// Nodes in id order.
    pub fn nodes(&self) -> impl Iterator<Item = &NodeRecord> {
        self.nodes.values()
    }

    /// Edges in id order.
    pub fn edges(&self) -> impl Iterator<Item = &EdgeRecord> {
        self.edges.values()
    }

    /// Ids of nodes carrying `label`, in id order.
    pub fn nodes_with_label(&self, label: &str) -> impl Iterator<Item = &NodeRecord> {
        self.label_index
            .get(label)
            .into_iter()
            .flatten()
            .filter_map(|id| self.nodes.get(id))
    }

    /// Outgoing edges of `id`, in edge-id order.
    pub fn out_edges(&self, id: &str) -> impl Iterator<Item = &EdgeRecord> {
        self.out_index
            .get(id)
            .into_iter()
            .flatten()
            .filter_map(|e| self.edges.get(e))
    }

    /// Incoming edges of `id`, in edge-id order.
    pub fn in_edges(&self, id: &str) -> impl Iterator<Item = &EdgeRecord> {
        self.in_index
            .get(id)
            .into_iter()
            .flatten()
            .filter_map(|e| self.edges.get(e))
    }

    /// Distinct node labels and relation types present, sorted.
    pub fn observed_schema(&self) -> SchemaHint {
        let labels: BTreeSet<&str> = self
            .nodes
            .values()
            .flat_map(|n| n.labels.iter().map(String::as_str))
            .collect();
        let rels: BTreeSet<&str> = self.edges.values().map(|e| e.label.as_str()).collect();
        SchemaHint {
            labels: labels.into_iter().map(str::to_string).collect(),
            relation_types: rels.into_iter().map(str::to_string).collect(),
        }
    }

    /// Applies `batch` atomically. On any error the graph is left exactly
    /// as it was, version included.
    pub fn mutate(&mut self, batch: &[Mutation]) -> Result<u64, GraphError> {
        if batch.is_empty() {
            return Err(GraphError::EmptyBatch);
        }
        let mut undo = Vec::with_capacity(batch.len());
        for m in batch {
            if let Err(e) = self.apply(m, &mut undo) {
                while let Some(u) = undo.pop() {
                    self.revert(u);
                }
                return Err(e);
            }
        }
        self.version += 1;
        Ok(self.version)
    }

    fn apply(&mut self, m: &Mutation, undo: &mut Vec<Undo>) -> Result<(), GraphError> {
        match m {
            Mutation::CreateNode(node) => {
                validate_node(node)?;
                if self.nodes.contains_key(&node.id) {
                    return Err(GraphError::DuplicateId(node.id.clone()));
                }
                self.insert_node(node.clone());
                undo.push(Undo::RemoveNode(node.id.clone()));
            }
            Mutation::CreateEdge(edge) => {
                validate_edge(edge)?;
                if self.edges.contains_key(&edge.id) {
                    return Err(GraphError::DuplicateId(edge.id.clone()));
                }
                for end in [&edge.src, &edge.dst] {
                    if !self.nodes.contains_key(end) {
                        return Err(GraphError::DanglingEndpoint {
                            edge: edge.id.clone(),
                            node: end.clone(),
                        });
                    }
                }
                self.insert_edge(edge.clone());
                undo.push(Undo::RemoveEdge(edge.id.clone()));
            }
            Mutation::DeleteEdge { id } => {
                let edge = self.remove_edge(id).ok_or_else(|| GraphError::UnknownId(id.clone()))?;
                undo.push(Undo::RestoreEdge(edge));
            }
            Mutation::DeleteNode { id } => {
                if !self.nodes.contains_key(id) {
                    return Err(GraphError::UnknownId(id.clone()));
                }
                let incident: BTreeSet<String> = self
                    .out_index
                    .get(id)
                    .into_iter()
                    .chain(self.in_index.get(id))
                    .flatten()
                    .cloned()
                    .collect();
                for eid in incident {
                    if let Some(edge) = self.remove_edge(&eid) {
                        undo.push(Undo::RestoreEdge(edge));
                    }
                }
                let node = self.remove_node(id).expect("checked above");
                undo.push(Undo::RestoreNode(node));
            }
        }
        Ok(())
    }

    fn revert(&mut self, u: Undo) {
        match u {
            Undo::RemoveNode(id) => {
                self.remove_node(&id);
            }
            Undo::RemoveEdge(id) => {
                self.remove_edge(&id);
            }
            Undo::RestoreNode(n) => self.insert_node(n),
            Undo::RestoreEdge(e) => self.insert_edge(e),
        }
    }

    fn insert_node(&mut self, node: NodeRecord) {
        for l in &node.labels {
            self.label_index.entry(l.clone()).or_default().insert(node.id.clone());
        }
        self.nodes.insert(node.id.clone(), node);
    }

    fn remove_node(&mut self, id: &str) -> Option<NodeRecord> {
        let node = self.nodes.remove(id)?;
        for l in &node.labels {
            if let Some(set) = self.label_index.get_mut(l) {
                set.remove(id);
                if set.is_empty() {
                    self.label_index.remove(l);
                }
            }
        }
        self.out_index.remove(id);
        self.in_index.remove(id);
        Some(node)
    }

    fn insert_edge(&mut self, edge: EdgeRecord) {
        self.out_index
            .entry(edge.src.clone())
            .or_default()
            .insert(edge.id.clone());
        self.in_index
            .entry(edge.dst.clone())
            .or_default()
            .insert(edge.id.clone());
        self.edges.insert(edge.id.clone(), edge);
    }

    fn remove_edge(&mut self, id: &str) -> Option<EdgeRecord> {
        let edge = self.edges.remove(id)?;
        for (index, key) in [(&mut self.out_index, &edge.src), (&mut self.in_index, &edge.dst)] {
            if let Some(set) = index.get_mut(key) {
                set.remove(id);
                if set.is_empty() {
                    index.remove(key);
                }
            }
        }
        Some(edge)
    }

    pub fn snapshot(&self) -> GraphSnapshot {
        GraphSnapshot {
            graph: Arc::new(self.clone()),
            taken_at_version: self.version,
        }
    }

    /// Restores content from `snapshot` and bumps the version.
    pub fn restore(&mut self, snapshot: &GraphSnapshot) -> Result<u64, GraphError> {
        if snapshot.graph.lineage != self.lineage {
            return Err(GraphError::LineageMismatch);
        }
        let version = self.version + 1;
        *self = (*snapshot.graph).clone();
        self.version = version;
        Ok(version)
    }

    /// Incident `(edge, other endpoint)` pairs in edge-id order.
    pub fn neighbors(
        &self,
        node_id: &str,
        direction: Direction,
        label_filter: Option<&str>,
    ) -> Result<Vec<(&EdgeRecord, &NodeRecord)>, GraphError> {
        if !self.nodes.contains_key(node_id) {
            return Err(GraphError::UnknownId(node_id.to_string()));
        }
        let mut ids: BTreeSet<&String> = BTreeSet::new();
        if matches!(direction, Direction::Out | Direction::Both) {
            ids.extend(self.out_index.get(node_id).into_iter().flatten());
        }
        if matches!(direction, Direction::In | Direction::Both) {
            ids.extend(self.in_index.get(node_id).into_iter().flatten());
        }
        Ok(ids
            .into_iter()
            .filter_map(|eid| self.edges.get(eid))
            .filter(|e| label_filter.is_none_or(|l| e.label == l))
            .map(|e| {
                let other = if direction == Direction::In {
                    &e.src
                } else if e.src == node_id {
                    &e.dst
                } else {
                    &e.src
                };
                (e, &self.nodes[other])
            })
            .collect())
    }

    /// Finds an edge id not yet used, starting from `base`.
    pub fn free_edge_id(&self, base: &str, taken: &BTreeSet<String>) -> String {
        free_id(base, |c| self.edges.contains_key(c) || taken.contains(c))
    }

    pub fn free_node_id(&self, base: &str, taken: &BTreeSet<String>) -> String {
        free_id(base, |c| self.nodes.contains_key(c) || taken.contains(c))
    }
}

fn free_id(base: &str, used: impl Fn(&str) -> bool) -> String {
    if !used(base) {
        return base.to_string();
    }
    (2..)
        .map(|i| format!("{base}#{i}"))
        .find(|c| !used(c))
        .expect("unbounded search")
}

fn validate_props(id: &str, props: &Props) -> Result<(), GraphError> {
    for (k, v) in props {
        if k.is_empty() {
            return Err(GraphError::InvalidRecord {
                id: id.to_string(),
                reason: "empty property name".into(),
            });
        }
        if !v.is_finite() {
            return Err(GraphError::InvalidRecord {
                id: id.to_string(),
                reason: format!("property '{k}' is not a finite number"),
            });
        }
    }
    Ok(())
}

fn validate_node(node: &NodeRecord) -> Result<(), GraphError> {
    if node.id.is_empty() {
        return Err(GraphError::InvalidRecord {
            id: String::new(),
            reason: "empty node id".into(),
        });
    }
    if node.labels.iter().any(String::is_empty) {
        return Err(GraphError::InvalidRecord {
            id: node.id.clone(),
            reason: "empty label".into(),
        });
    }
    validate_props(&node.id, &node.props)
}

fn validate_edge(edge: &EdgeRecord) -> Result<(), GraphError> {
    if edge.id.is_empty() {
        return Err(GraphError::InvalidRecord {
            id: String::new(),
            reason: "empty edge id".into(),
        });
    }
    if edge.label.is_empty() {
        return Err(GraphError::InvalidRecord {
            id: edge.id.clone(),
            reason: "empty relation label".into(),
        });
    }
    validate_props(&edge.id, &edge.props)
}

/// Immutable capture of a graph, cheap to share across threads.
#[derive(Debug, Clone)]
pub struct GraphSnapshot {
    pub graph: Arc<KnowledgeGraph>,
    pub taken_at_version: u64,
}
