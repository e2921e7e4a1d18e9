//! Random update deltas with injected faults, and the sweep that checks
//! the store ends at the snapshot or at the snapshot plus the whole delta.

use std::sync::Arc;

use kgpilot_core::gql::{self, DuplicatePolicy, ExecOptions};
use kgpilot_core::graph::{export_to_string, GraphBackend, GraphStore, KnowledgeGraph, Mutation, NodeRecord};
use kgpilot_core::llm::{FnProvider, Gateway};
use kgpilot_core::pipeline::{apply_delta, integrate, FailureKind, NewInfo, UpdateDelta};
use rand::Rng;
use serde_json::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    Syntax,
    TypeMismatch,
    Verification,
}

pub fn random_case(r: &mut impl Rng) -> (KnowledgeGraph, UpdateDelta, Option<Fault>) {
    let n = r.random_range(1..=5);
    let mut g = KnowledgeGraph::new();
    let batch: Vec<Mutation> = (0..n)
        .map(|i| {
            Mutation::CreateNode(
                NodeRecord::new(format!("c{i}"))
                    .with_label("Concept")
                    .with_prop("name", format!("C{i}")),
            )
        })
        .collect();
    g.mutate(&batch).unwrap();

    let mut queries = Vec::new();
    for _ in 0..r.random_range(1..=6) {
        let i = r.random_range(0..8);
        let j = r.random_range(0..8);
        if r.random_bool(0.4) {
            queries.push(format!("CREATE (n:Concept {{name: 'C{i}'}})"));
        } else {
            queries.push(format!(
                "MATCH (a:Concept {{name: 'C{i}'}}), (b:Concept {{name: 'C{j}'}}) CREATE (a)-[:related_to]->(b)"
            ));
        }
    }
    let mut verification = vec!["MATCH (n:Concept) RETURN n".to_string()];
    let fault = match r.random_range(0..4) {
        0 => Some(Fault::Syntax),
        1 => Some(Fault::TypeMismatch),
        2 => Some(Fault::Verification),
        _ => None,
    };
    match fault {
        Some(Fault::Syntax) => {
            let at = r.random_range(0..=queries.len());
            queries.insert(at, "CREATE (n:Concept {name: 'Broken'".into());
        }
        Some(Fault::TypeMismatch) => {
            let at = r.random_range(0..=queries.len());
            queries.insert(at, "MATCH (a:Concept) WHERE a.name > 3 CREATE (a)-[:r]->(a)".into());
        }
        Some(Fault::Verification) => {
            let at = r.random_range(0..=verification.len());
            verification.insert(at, "MATCH (z:Concept {name: 'Missing'}) RETURN z".into());
        }
        None => {}
    }
    let delta = UpdateDelta {
        new_nodes: vec![],
        new_edges: vec![],
        integration_queries: queries,
        verification_queries: verification,
    };
    (g, delta, fault)
}

/// Sequential application of every integration query to a private copy.
pub fn full_delta(g: &KnowledgeGraph, delta: &UpdateDelta) -> KnowledgeGraph {
    let mut next = g.clone();
    let options = ExecOptions {
        duplicates: DuplicatePolicy::Skip,
    };
    for q in &delta.integration_queries {
        gql::execute(&gql::parse(q).unwrap(), &mut next, options).unwrap();
    }
    next
}

/// The update agent's reply carrying `delta`'s queries.
pub fn agent_reply(delta: &UpdateDelta) -> String {
    let items = |qs: &[String]| {
        qs.iter()
            .map(|q| json!({"purpose": "step", "query": q}))
            .collect::<Vec<_>>()
    };
    json!({
        "analysis": "random case",
        "cypher_queries": items(&delta.integration_queries),
        "verification_queries": items(&delta.verification_queries),
    })
    .to_string()
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct SweepOutcome {
    pub cases: usize,
    pub faulted: usize,
    /// Cases whose final export was neither the snapshot nor the full delta.
    pub mismatches: usize,
}

/// Runs `cases` random updates. With `via_agent` each goes through the
/// update agent (a fake model replying with the delta); otherwise the
/// delta is applied directly.
pub fn atomicity_sweep(cases: usize, seed: u64, via_agent: bool) -> SweepOutcome {
    let mut r = super::graphs::rng(seed);
    let mut out = SweepOutcome {
        cases,
        ..SweepOutcome::default()
    };
    for _ in 0..cases {
        let (g, delta, fault) = random_case(&mut r);
        let snapshot = export_to_string(&g);
        let v0 = g.version();
        let store = GraphStore::new(g.clone());
        let result = if via_agent {
            let reply = agent_reply(&delta);
            let gw = Gateway::new(Arc::new(FnProvider::new("update-fake", move |_| Ok(reply.clone()))));
            integrate(&NewInfo::Text("random case".into()), &store, &gw)
        } else {
            apply_delta(&store, &delta)
        };
        let after = store.current();
        let ok = match fault {
            Some(f) => {
                out.faulted += 1;
                let verification_kind = match (&result, f) {
                    (Err(e), Fault::Verification) => matches!(e.kind, FailureKind::IntegrationFailed { .. }),
                    (Err(_), _) => true,
                    (Ok(_), _) => false,
                };
                verification_kind && export_to_string(&after) == snapshot && after.version() == v0
            }
            None => {
                let expected = full_delta(&g, &delta);
                let bump = u64::from(expected != g);
                result.is_ok_and(|o| o.version_after == after.version())
                    && export_to_string(&after) == export_to_string(&expected)
                    && after.version() == v0 + bump
            }
        };
        if !ok {
            out.mismatches += 1;
        }
    }
    out
}
