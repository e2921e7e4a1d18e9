//! Task execution: graph algorithms for the algorithmic classes, generated
//! queries with bounded refinement for the rest.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::json;

use super::agents::{rows_json, SYSTEM_PROMPT};
use super::{
    ConceptExtraction, ExecutionMode, FailureKind, PipelineConfig, PipelineError, QueryAttempt, QueryMode, Stage,
    TaskClass, TaskExecution, TaskNode,
};
use crate::gql::{self, QueryResult, QueryStats, ResultValue};
use crate::graph::{KnowledgeGraph, Value};
use crate::llm::{render_template, FieldKind, FieldSpec, Gateway};
use crate::taskops::{self, TaskError};

/// What a task sees of the run so far.
pub struct TaskContext<'a> {
    pub class: TaskClass,
    pub extraction: &'a ConceptExtraction,
    /// Tasks already executed in this run, in execution order.
    pub completed: &'a [TaskExecution],
    /// Whether this is the last task of the plan.
    pub terminal: bool,
    pub config: &'a PipelineConfig,
}

impl TaskContext<'_> {
    pub fn mode(&self) -> ExecutionMode {
        let algorithmic = match self.config.query_mode {
            QueryMode::Llm => false,
            QueryMode::Hybrid => self.class.number() <= 5,
            QueryMode::Deterministic => self.class.number() <= 6,
        };
        if algorithmic {
            ExecutionMode::Deterministic
        } else {
            ExecutionMode::Llm
        }
    }
}

/// Labels, relation types and per-label property keys, in the layout the
/// query-generation prompt shows.
pub fn schema_json(graph: &KnowledgeGraph) -> String {
    let observed = graph.observed_schema();
    let mut labels: BTreeSet<String> = observed.labels.into_iter().collect();
    let mut rels: BTreeSet<String> = observed.relation_types.into_iter().collect();
    if let Some(hint) = &graph.schema_hint {
        labels.extend(hint.labels.iter().cloned());
        rels.extend(hint.relation_types.iter().cloned());
    }
    let mut props: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for n in graph.nodes() {
        for l in &n.labels {
            props.entry(l).or_default().extend(n.props.keys().map(String::as_str));
        }
    }
    serde_json::to_string_pretty(&json!({
        "nodes": labels,
        "relationships": rels,
        "properties": props,
    }))
    .expect("schema serializes")
}

/// The base prompt plus the failed query and what went wrong with it.
pub fn refine_prompt(base: &str, query: &str, outcome: &str) -> String {
    format!(
        "{base}\n\nPrevious attempt:\n{query}\nObservation: {outcome}\nRevise the query and reply with the same JSON format."
    )
}

pub fn execute_task(
    task: &TaskNode,
    ctx: &TaskContext<'_>,
    graph: &KnowledgeGraph,
    gateway: &Gateway,
) -> Result<TaskExecution, PipelineError> {
    match ctx.mode() {
        ExecutionMode::Deterministic => Ok(deterministic(task, ctx, graph)),
        ExecutionMode::Llm => generated(task, ctx, graph, gateway),
    }
}

fn record(task: &TaskNode, mode: ExecutionMode) -> TaskExecution {
    TaskExecution {
        task_id: task.id,
        description: task.description.clone(),
        mode,
        operation: None,
        attempts: Vec::new(),
        result: None,
        warnings: Vec::new(),
    }
}

fn table(columns: &[&str], rows: Vec<Vec<ResultValue>>) -> QueryResult {
    QueryResult {
        columns: columns.iter().map(|c| c.to_string()).collect(),
        stats: QueryStats {
            rows_returned: rows.len(),
            ..QueryStats::default()
        },
        rows,
    }
}

fn s(v: impl Into<String>) -> ResultValue {
    ResultValue::Scalar(Value::Str(v.into()))
}

fn i(v: usize) -> ResultValue {
    ResultValue::Scalar(Value::Int(v as i64))
}

/// Linked node ids for the first `n` mentions, or the first unlinked mention.
fn roles(extraction: &ConceptExtraction, n: usize) -> Result<Vec<String>, String> {
    extraction
        .entities
        .iter()
        .take(n)
        .map(|m| m.node_id().map(str::to_string).ok_or_else(|| m.mention.clone()))
        .collect()
}

/// Runs the class algorithm in the terminal task; earlier tasks of an
/// algorithmic plan are recorded without work since the algorithm covers them.
fn deterministic(task: &TaskNode, ctx: &TaskContext<'_>, graph: &KnowledgeGraph) -> TaskExecution {
    let mut out = record(task, ExecutionMode::Deterministic);
    if !ctx.terminal {
        return out;
    }
    let (columns, needed): (&[&str], usize) = match ctx.class {
        TaskClass::RelationJudgment => (&["evidence", "source", "relation", "target"], 2),
        TaskClass::PrerequisitePrediction => (&["prerequisite", "depth"], 1),
        TaskClass::PathSearching => (&["step", "node", "via"], 2),
        TaskClass::ConceptClustering => (&["cluster", "node"], 0),
        TaskClass::SubgraphCompletion => (&["source", "target", "score", "evidence"], 0),
        TaskClass::IdeaHamster | TaskClass::Freestyle => (&["source", "relation", "target"], 0),
    };
    out.result = Some(table(columns, Vec::new()));
    let ids = match roles(ctx.extraction, needed) {
        Ok(ids) => ids,
        Err(mention) => {
            out.warnings.push(format!("unlinked concept: {mention}"));
            return out;
        }
    };
    let linked = ctx.extraction.linked_ids();
    let cfg = ctx.config;
    let (operation, rows): (String, Result<Vec<Vec<ResultValue>>, TaskError>) = match ctx.class {
        TaskClass::RelationJudgment => (
            format!("judge_relation({}, {})", ids[0], ids[1]),
            taskops::judge_relation(graph, &ids[0], &ids[1]).map(|j| {
                let mut rows: Vec<Vec<ResultValue>> = j
                    .direct_edges
                    .iter()
                    .map(|e| vec![s("direct"), s(&e.src), s(&e.label), s(&e.dst)])
                    .collect();
                for (n, p) in j.connecting_paths.iter().enumerate() {
                    for eid in &p.edges {
                        let e = graph.edge(eid).expect("path edge exists");
                        rows.push(vec![s(format!("path {}", n + 1)), s(&e.src), s(&e.label), s(&e.dst)]);
                    }
                }
                out.warnings.push(format!("verdict: {}", j.verdict));
                rows
            }),
        ),
        TaskClass::PrerequisitePrediction => (
            format!("prerequisites({}, {})", ids[0], cfg.prereq_relation),
            taskops::prerequisites(graph, &ids[0], &cfg.prereq_relation).map(|p| {
                if let Some(cycle) = &p.cycle {
                    out.warnings.push(format!("prerequisite cycle: {}", cycle.join(" -> ")));
                }
                p.nodes.iter().map(|n| vec![s(n), i(p.depths[n])]).collect()
            }),
        ),
        TaskClass::PathSearching => (
            format!("find_path({}, {}, undirected)", ids[0], ids[1]),
            taskops::find_path(graph, &ids[0], &ids[1], true).map(|p| {
                p.nodes
                    .iter()
                    .enumerate()
                    .map(|(k, n)| {
                        let via = if k == 0 { ResultValue::Null } else { s(&p.edges[k - 1]) };
                        vec![i(k), s(n), via]
                    })
                    .collect()
            }),
        ),
        TaskClass::ConceptClustering => {
            let domain = ctx.extraction.domain.as_deref();
            let mut res = taskops::cluster(graph, domain);
            if let (Err(TaskError::EmptySelection), Some(d)) = (&res, domain) {
                out.warnings
                    .push(format!("no nodes in domain '{d}'; clustering the whole graph"));
                res = taskops::cluster(graph, None);
            }
            (
                format!("cluster({})", domain.unwrap_or("*")),
                res.map(|c| {
                    c.clusters
                        .iter()
                        .enumerate()
                        .flat_map(|(k, members)| members.iter().map(move |m| vec![i(k + 1), s(m)]))
                        .collect()
                }),
            )
        }
        TaskClass::SubgraphCompletion => (
            format!("complete_subgraph([{}], {})", linked.join(", "), cfg.completion_k),
            if linked.is_empty() {
                Err(TaskError::EmptySelection)
            } else {
                taskops::complete_subgraph(graph, &linked, cfg.completion_k).map(|cs| {
                    cs.into_iter()
                        .map(|c| {
                            vec![
                                s(c.src),
                                s(c.dst),
                                ResultValue::Scalar(Value::Float(c.score)),
                                s(c.evidence.join(", ")),
                            ]
                        })
                        .collect()
                })
            },
        ),
        TaskClass::IdeaHamster | TaskClass::Freestyle => (
            format!("idea_context([{}], {})", linked.join(", "), cfg.idea_radius),
            if linked.is_empty() {
                Err(TaskError::EmptySelection)
            } else {
                taskops::idea_context(graph, &linked, cfg.idea_radius)
                    .map(|c| c.triples.into_iter().map(|(a, l, b)| vec![s(a), s(l), s(b)]).collect())
            },
        ),
    };
    let (rows, error) = match rows {
        Ok(rows) => (rows, None),
        Err(e) => {
            out.warnings.push(e.to_string());
            (Vec::new(), Some(e.to_string()))
        }
    };
    out.attempts.push(QueryAttempt {
        query: operation.clone(),
        error,
        rows: rows.len(),
    });
    out.operation = Some(operation);
    out.result = Some(table(columns, rows));
    out
}

fn task_text(task: &TaskNode, completed: &[TaskExecution]) -> String {
    let deps: Vec<TaskExecution> = completed
        .iter()
        .filter(|t| task.dependencies.contains(&t.task_id))
        .cloned()
        .collect();
    let rows = rows_json(&deps);
    if rows == "[]" {
        task.description.clone()
    } else {
        format!("{}\nResults of prerequisite tasks: {rows}", task.description)
    }
}

/// ReAct loop: generate, run, feed the observation back. An empty result
/// is refined once and otherwise accepted.
fn generated(
    task: &TaskNode,
    ctx: &TaskContext<'_>,
    graph: &KnowledgeGraph,
    gateway: &Gateway,
) -> Result<TaskExecution, PipelineError> {
    let concepts = serde_json::to_string(&ctx.extraction.mentions()).expect("strings serialize");
    let base = render_template(
        "kg_interaction",
        &[
            ("task", &task_text(task, ctx.completed)),
            ("concepts", &concepts),
            ("schema", &schema_json(graph)),
        ],
    )
    .map_err(|e| PipelineError::invalid(Stage::Execution, e.to_string()))?;
    let spec = FieldSpec::new()
        .required("cypher_query", FieldKind::NonEmptyText)
        .optional("query_objective", FieldKind::Text)
        .optional("query_explanation", FieldKind::Text)
        .optional("potential_optimizations", FieldKind::TextList)
        .optional("refinement_strategy", FieldKind::Text);

    let mut out = record(task, ExecutionMode::Llm);
    let mut prompt = base.clone();
    let mut empty: Option<QueryResult> = None;
    let budget = ctx.config.refine_budget.max(1);
    for round in 0..budget {
        let req = gateway.request(Stage::Execution.as_str(), SYSTEM_PROMPT, &prompt);
        let reply = gateway
            .complete_structured(&req, &spec)
            .map_err(|e| PipelineError::new(Stage::Execution, e))?;
        let query = reply.text("cypher_query").unwrap_or_default().trim().to_string();
        match gql::parse(&query).and_then(|q| gql::execute_read(&q, graph)) {
            Err(e) => {
                out.attempts.push(QueryAttempt {
                    query: query.clone(),
                    error: Some(e.to_string()),
                    rows: 0,
                });
                prompt = refine_prompt(&base, &query, &e.to_string());
            }
            Ok(r) if r.is_empty() && empty.is_none() && round + 1 < budget => {
                out.attempts.push(QueryAttempt {
                    query: query.clone(),
                    error: None,
                    rows: 0,
                });
                empty = Some(r);
                prompt = refine_prompt(&base, &query, "the query ran but returned no rows");
            }
            Ok(r) => {
                out.attempts.push(QueryAttempt {
                    query,
                    error: None,
                    rows: r.rows.len(),
                });
                out.result = Some(r);
                return Ok(out);
            }
        }
    }
    if let Some(r) = empty {
        out.warnings.push("accepted an empty result".into());
        out.result = Some(r);
        return Ok(out);
    }
    Err(PipelineError::new(
        Stage::Execution,
        FailureKind::TaskFailed {
            task: task.id,
            attempts: out.attempts,
        },
    ))
}
