//! Knowledge updates: a delta is applied to a private copy, verified, and
//! committed as one batch or not at all.

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::agents::SYSTEM_PROMPT;
use super::execute::schema_json;
use super::{FailureKind, PipelineError, Stage, UpdateDelta};
use crate::gql::{self, DuplicatePolicy, ExecOptions};
use crate::graph::{GraphBackend, GraphStore, KnowledgeGraph, Mutation};
use crate::llm::{render_template, FieldKind, FieldSpec, Gateway};

/// Source material for an update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "content", rename_all = "snake_case")]
pub enum NewInfo {
    Text(String),
    Structured(Json),
}

impl NewInfo {
    fn render(&self) -> String {
        match self {
            NewInfo::Text(t) => t.clone(),
            NewInfo::Structured(v) => serde_json::to_string_pretty(v).expect("json serializes"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationOutcome {
    pub delta: UpdateDelta,
    pub version_before: u64,
    pub version_after: u64,
    pub nodes_created: usize,
    pub edges_created: usize,
    /// Row count of each verification query, in order.
    pub verification_rows: Vec<usize>,
}

fn query_error(index: usize, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::new(
        Stage::Integration,
        FailureKind::Query(format!("integration query {index}: {e}")),
    )
}

/// Everything `next` holds that `base` does not, as one creation batch.
/// Updates only ever add records, so this is the whole difference.
fn additions(base: &KnowledgeGraph, next: &KnowledgeGraph) -> Vec<Mutation> {
    let nodes = next
        .nodes()
        .filter(|n| !base.contains_node(&n.id))
        .map(|n| Mutation::CreateNode(n.clone()));
    let edges = next
        .edges()
        .filter(|e| base.edge(&e.id).is_none())
        .map(|e| Mutation::CreateEdge(e.clone()));
    nodes.chain(edges).collect()
}

fn stage_delta(g: &KnowledgeGraph, delta: &UpdateDelta) -> Result<(KnowledgeGraph, Vec<usize>), PipelineError> {
    if !delta.integration_queries.is_empty() && delta.verification_queries.is_empty() {
        return Err(PipelineError::invalid(
            Stage::Integration,
            "verification queries are required when integration queries are present",
        ));
    }
    let mut scratch = g.clone();
    let mut batch = Vec::new();
    for n in &delta.new_nodes {
        if !scratch.contains_node(&n.id)
            && !batch
                .iter()
                .any(|m| matches!(m, Mutation::CreateNode(x) if x.id == n.id))
        {
            batch.push(Mutation::CreateNode(n.clone()));
        }
    }
    if !batch.is_empty() {
        scratch.mutate(&batch).map_err(|e| query_error(0, e))?;
    }
    let mut batch = Vec::new();
    for e in &delta.new_edges {
        let duplicate = scratch.edge(&e.id).is_some()
            || scratch.out_edges(&e.src).any(|x| x.label == e.label && x.dst == e.dst)
            || batch.iter().any(|m| matches!(m, Mutation::CreateEdge(x) if x.id == e.id || (x.src == e.src && x.label == e.label && x.dst == e.dst)));
        if !duplicate {
            batch.push(Mutation::CreateEdge(e.clone()));
        }
    }
    if !batch.is_empty() {
        scratch.mutate(&batch).map_err(|e| query_error(0, e))?;
    }

    let options = ExecOptions {
        duplicates: DuplicatePolicy::Skip,
    };
    for (i, text) in delta.integration_queries.iter().enumerate() {
        let q = gql::parse(text).map_err(|e| query_error(i, e))?;
        gql::execute(&q, &mut scratch, options).map_err(|e| query_error(i, e))?;
    }
    let mut rows = Vec::with_capacity(delta.verification_queries.len());
    for (index, text) in delta.verification_queries.iter().enumerate() {
        let q = gql::parse(text).map_err(|e| {
            PipelineError::new(
                Stage::Integration,
                FailureKind::Query(format!("verification query {index}: {e}")),
            )
        })?;
        let r = gql::execute_read(&q, &scratch).map_err(|e| {
            PipelineError::new(
                Stage::Integration,
                FailureKind::Query(format!("verification query {index}: {e}")),
            )
        })?;
        if r.rows.is_empty() {
            return Err(PipelineError::new(
                Stage::Integration,
                FailureKind::IntegrationFailed { index },
            ));
        }
        rows.push(r.rows.len());
    }
    Ok((scratch, rows))
}

/// Applies `delta` atomically. Duplicate nodes and edges are no-ops. Any
/// failure leaves the store untouched; success bumps the version by one
/// unless nothing new was added.
pub fn apply_delta(store: &GraphStore, delta: &UpdateDelta) -> Result<IntegrationOutcome, PipelineError> {
    store.write(|g| {
        let version_before = g.version();
        let (scratch, verification_rows) = stage_delta(g, delta)?;
        let batch = additions(g, &scratch);
        if !batch.is_empty() {
            g.mutate(&batch).map_err(|e| query_error(0, e))?;
        }
        let count = |f: fn(&Mutation) -> bool| batch.iter().filter(|m| f(m)).count();
        Ok(IntegrationOutcome {
            delta: delta.clone(),
            version_before,
            version_after: g.version(),
            nodes_created: count(|m| matches!(m, Mutation::CreateNode(_))),
            edges_created: count(|m| matches!(m, Mutation::CreateEdge(_))),
            verification_rows,
        })
    })
}

fn queries(v: Option<&Json>) -> Vec<String> {
    v.and_then(Json::as_array)
        .into_iter()
        .flatten()
        .filter_map(|item| match item {
            Json::String(q) => Some(q.clone()),
            Json::Object(o) => o.get("query").and_then(Json::as_str).map(str::to_string),
            _ => None,
        })
        .map(|q| q.trim().to_string())
        .filter(|q| !q.is_empty())
        .collect()
}

/// Asks the integration agent for queries that add `info`, then applies them.
pub fn integrate(info: &NewInfo, store: &GraphStore, gateway: &Gateway) -> Result<IntegrationOutcome, PipelineError> {
    let schema = schema_json(&store.current());
    let prompt = render_template(
        "integration",
        &[("new_info", &info.render()), ("graph_schema", &schema)],
    )
    .map_err(|e| PipelineError::invalid(Stage::Integration, e.to_string()))?;
    let spec = FieldSpec::new()
        .required("cypher_queries", FieldKind::ObjectList)
        .optional("verification_queries", FieldKind::ObjectList)
        .optional("analysis", FieldKind::Text)
        .optional("integration_strategy", FieldKind::Text)
        .optional("conflict_resolution", FieldKind::Text)
        .optional("rollback_plan", FieldKind::Text)
        .check(|o| {
            for key in ["cypher_queries", "verification_queries"] {
                let items = o.get(key).and_then(Json::as_array).into_iter().flatten();
                for (i, item) in items.enumerate() {
                    if !item.get("query").is_some_and(Json::is_string) {
                        return Err(format!("{key}[{i}] needs a 'query' string"));
                    }
                }
            }
            Ok(())
        });
    let req = gateway.request(Stage::Integration.as_str(), SYSTEM_PROMPT, &prompt);
    let reply = gateway
        .complete_structured(&req, &spec)
        .map_err(|e| PipelineError::new(Stage::Integration, e))?;
    let delta = UpdateDelta {
        new_nodes: Vec::new(),
        new_edges: Vec::new(),
        integration_queries: queries(reply.value.get("cypher_queries")),
        verification_queries: queries(reply.value.get("verification_queries")),
    };
    apply_delta(store, &delta)
}
