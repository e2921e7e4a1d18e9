//! The prompt-driven agents. Each renders its template, asks the gateway
//! for a validated JSON object and turns it into a typed message.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{Map, Value as Json};

use super::{
    AgentResponse, ConceptExtraction, ExtractedRelation, FailureKind, IntentClassification, LinkedMention,
    PipelineError, ReasoningOutput, Stage, TaskClass, TaskExecution, TaskNode, TaskPlan,
};
use crate::embedding::{EntityLinker, LinkResult};
use crate::graph::KnowledgeGraph;
use crate::llm::{
    coerce_f64, coerce_int, render_template, string_list, FieldKind, FieldSpec, Gateway, StructuredReply,
};

pub const SYSTEM_PROMPT: &str =
    "You are one agent in a knowledge graph question answering system. Reply with a single valid JSON object.";

/// Added to the observations when no task returned rows.
pub const EMPTY_EVIDENCE: &str = "no supporting rows found";

/// Added to the caveats when reasoning reached no conclusion.
pub const INSUFFICIENT_EVIDENCE: &str = "insufficient graph evidence";

fn render(stage: Stage, id: &str, slots: &[(&str, &str)]) -> Result<String, PipelineError> {
    render_template(id, slots).map_err(|e| PipelineError::invalid(stage, e.to_string()))
}

fn ask(gateway: &Gateway, stage: Stage, prompt: &str, spec: &FieldSpec) -> Result<StructuredReply, PipelineError> {
    let req = gateway.request(stage.as_str(), SYSTEM_PROMPT, prompt);
    gateway
        .complete_structured(&req, spec)
        .map_err(|e| PipelineError::new(stage, e))
}

/// Appends the recent conversation, oldest first, when there is any.
pub(super) fn with_history(prompt: String, history: &[(String, String)]) -> String {
    if history.is_empty() {
        return prompt;
    }
    let mut out = prompt;
    out.push_str("\n\nRecent conversation (oldest first):\n");
    for (i, (q, a)) in history.iter().enumerate() {
        out.push_str(&format!("{}. Q: {q}\n   A: {a}\n", i + 1));
    }
    out
}

fn text(obj: &Map<String, Json>, key: &str) -> Option<String> {
    obj.get(key)
        .and_then(Json::as_str)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
}

fn list(obj: &Map<String, Json>, key: &str) -> Vec<String> {
    obj.get(key).and_then(string_list).unwrap_or_default()
}

pub fn classify_intent(
    query: &str,
    gateway: &Gateway,
    history: &[(String, String)],
    confidence_threshold: f64,
) -> Result<IntentClassification, PipelineError> {
    if query.trim().is_empty() {
        return Err(PipelineError::new(Stage::Intent, FailureKind::EmptyQuery));
    }
    let prompt = with_history(render(Stage::Intent, "intent", &[("query", query)])?, history);
    let spec = FieldSpec::new()
        .required("task_classification", FieldKind::Integer { min: 1, max: 7 })
        .required("confidence", FieldKind::Percentage)
        .optional("key_concepts", FieldKind::TextList)
        .optional("reasoning", FieldKind::Text)
        .optional("linguistic_analysis", FieldKind::Text);
    let reply = ask(gateway, Stage::Intent, &prompt, &spec)?;
    let v = &reply.value;
    let n = coerce_int(&v["task_classification"]).expect("validated") as u8;
    let class = TaskClass::try_from(n).expect("validated range");
    let confidence = coerce_f64(&v["confidence"]).expect("validated");
    let (task_class, downgraded_from) = if confidence < confidence_threshold && class != TaskClass::Freestyle {
        (TaskClass::Freestyle, Some(class))
    } else {
        (class, None)
    };
    Ok(IntentClassification {
        task_class,
        confidence,
        key_concepts: list(v, "key_concepts"),
        reasoning: text(v, "reasoning").unwrap_or_default(),
        downgraded_from,
    })
}

fn unlinked(mention: &str) -> LinkResult<f64> {
    LinkResult {
        mention: mention.to_string(),
        node_id: None,
        score: 0.0,
        candidates: Vec::new(),
    }
}

pub fn extract_concepts(
    query: &str,
    intent: &IntentClassification,
    graph: &KnowledgeGraph,
    gateway: &Gateway,
    linker: &EntityLinker<f64>,
) -> Result<ConceptExtraction, PipelineError> {
    let class = intent.task_class;
    let prompt = render(
        Stage::Extraction,
        "extraction",
        &[("query", query), ("task_type", &class.label())],
    )?;
    let spec = FieldSpec::new()
        .optional("entities", FieldKind::TextList)
        .optional("relations", FieldKind::ObjectList)
        .optional("domain", FieldKind::Text)
        .optional("concept_1", FieldKind::Text)
        .optional("concept_2", FieldKind::Text)
        .optional("relation", FieldKind::Text)
        .optional("relation_description", FieldKind::Text)
        .optional("target_concept", FieldKind::Text);
    let reply = ask(gateway, Stage::Extraction, &prompt, &spec)?;
    let v = &reply.value;

    let generic = list(v, "entities");
    let mut mentions: Vec<String> = match class {
        TaskClass::RelationJudgment => {
            let pair: Vec<String> = ["concept_1", "concept_2"].iter().filter_map(|k| text(v, k)).collect();
            if pair.is_empty() {
                generic.clone()
            } else {
                pair
            }
        }
        TaskClass::PrerequisitePrediction => text(v, "target_concept")
            .map(|t| vec![t])
            .unwrap_or_else(|| generic.clone()),
        _ => generic.clone(),
    };
    let mut seen = BTreeSet::new();
    mentions.retain(|m| !m.trim().is_empty() && seen.insert(m.clone()));

    let minimum = match class {
        TaskClass::RelationJudgment => Some((2, "class 1 requires two concepts")),
        TaskClass::PrerequisitePrediction => Some((1, "class 2 requires a target concept")),
        TaskClass::PathSearching => Some((2, "class 3 requires two concepts")),
        TaskClass::SubgraphCompletion => Some((1, "class 5 requires at least one concept")),
        _ => None,
    };
    if let Some((n, message)) = minimum {
        if mentions.len() < n {
            return Err(PipelineError::invalid(Stage::Extraction, message));
        }
    }

    let entities = mentions
        .iter()
        .map(|m| LinkedMention {
            mention: m.clone(),
            link: linker.link(m, graph).unwrap_or_else(|_| unlinked(m)),
        })
        .collect();

    let relation_types = graph.observed_schema().relation_types;
    let mut relations: Vec<ExtractedRelation> = Vec::new();
    let mut push_relation = |ty: String, source: String, target: String| {
        let linked_type = linker.link_label(&ty, &relation_types).ok().and_then(|l| l.node_id);
        relations.push(ExtractedRelation {
            relation_type: ty,
            source,
            target,
            linked_type,
        });
    };
    if class == TaskClass::RelationJudgment && mentions.len() >= 2 {
        if let Some(r) = text(v, "relation") {
            push_relation(r, mentions[0].clone(), mentions[1].clone());
        }
    }
    for r in v.get("relations").and_then(Json::as_array).into_iter().flatten() {
        let Some(o) = r.as_object() else { continue };
        if let (Some(t), Some(s), Some(d)) = (text(o, "type"), text(o, "source"), text(o, "target")) {
            push_relation(t, s, d);
        }
    }

    Ok(ConceptExtraction {
        task_class: class,
        entities,
        relations,
        domain: text(v, "domain"),
        relation_description: text(v, "relation_description"),
    })
}

fn task_list_ok(obj: &Map<String, Json>) -> Result<(), String> {
    let tasks = obj["tasks"].as_array().expect("validated list");
    if tasks.is_empty() {
        return Err("plan must contain at least one task".into());
    }
    for (i, t) in tasks.iter().enumerate() {
        let t = t.as_object().expect("validated objects");
        if !t
            .get("id")
            .and_then(coerce_int)
            .is_some_and(|id| id >= 1 && id <= u32::MAX as i64)
        {
            return Err(format!("task {} needs a positive integer 'id'", i + 1));
        }
        if !t.get("description").is_some_and(Json::is_string) {
            return Err(format!("task {} needs a 'description' string", i + 1));
        }
        match t.get("dependencies") {
            None | Some(Json::Null) => {}
            Some(Json::Array(ds)) if ds.iter().all(|d| coerce_int(d).is_some_and(|x| x >= 1)) => {}
            Some(_) => return Err(format!("task {} has malformed 'dependencies'", i + 1)),
        }
    }
    Ok(())
}

fn parse_tasks(obj: &Map<String, Json>) -> Vec<TaskNode> {
    obj["tasks"]
        .as_array()
        .expect("validated")
        .iter()
        .map(|t| {
            let dependencies = t
                .get("dependencies")
                .and_then(Json::as_array)
                .map(|ds| ds.iter().filter_map(coerce_int).map(|d| d as u32).collect())
                .unwrap_or_default();
            TaskNode {
                id: coerce_int(&t["id"]).expect("validated") as u32,
                description: t["description"].as_str().unwrap_or_default().to_string(),
                dependencies,
            }
        })
        .collect()
}

/// Kahn's algorithm with the ready set drained in ascending id order.
pub fn order_tasks(tasks: &[TaskNode]) -> Result<Vec<u32>, FailureKind> {
    let mut deps: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    for t in tasks {
        if deps.insert(t.id, t.dependencies.iter().copied().collect()).is_some() {
            return Err(FailureKind::InvalidOutput(format!("duplicate task id {}", t.id)));
        }
    }
    for t in tasks {
        if let Some(&missing) = t.dependencies.iter().find(|d| !deps.contains_key(d)) {
            return Err(FailureKind::DanglingDependency { task: t.id, missing });
        }
    }
    let mut order = Vec::with_capacity(tasks.len());
    let mut done: BTreeSet<u32> = BTreeSet::new();
    loop {
        let ready = deps
            .iter()
            .find(|(id, ds)| !done.contains(*id) && ds.iter().all(|d| done.contains(d)))
            .map(|(id, _)| *id);
        match ready {
            Some(id) => {
                done.insert(id);
                order.push(id);
            }
            None => break,
        }
    }
    if order.len() == deps.len() {
        return Ok(order);
    }
    // Walk dependencies from the smallest blocked task until one repeats.
    let blocked: BTreeSet<u32> = deps.keys().filter(|id| !done.contains(id)).copied().collect();
    let mut walk = vec![*blocked.iter().next().unwrap()];
    loop {
        let cur = *walk.last().unwrap();
        let next = *deps[&cur]
            .iter()
            .find(|d| blocked.contains(d))
            .expect("blocked task has a blocked dependency");
        if let Some(pos) = walk.iter().position(|&x| x == next) {
            let mut cycle = walk.split_off(pos);
            let min_at = cycle.iter().enumerate().min_by_key(|(_, v)| **v).unwrap().0;
            cycle.rotate_left(min_at);
            return Err(FailureKind::CyclicPlan(cycle));
        }
        walk.push(next);
    }
}

pub fn plan_tasks(
    query: &str,
    intent: &IntentClassification,
    extraction: &ConceptExtraction,
    gateway: &Gateway,
) -> Result<TaskPlan, PipelineError> {
    let concepts = serde_json::to_string(&extraction.mentions()).expect("strings serialize");
    let prompt = render(
        Stage::Planning,
        "planning",
        &[
            ("user_intent", query),
            ("extracted_concepts", &concepts),
            ("task_type", &intent.task_class.label()),
        ],
    )?;
    let spec = FieldSpec::new()
        .required("tasks", FieldKind::ObjectList)
        .optional("goal_analysis", FieldKind::Text)
        .check(task_list_ok);
    let reply = ask(gateway, Stage::Planning, &prompt, &spec)?;
    let tasks = parse_tasks(&reply.value);
    let execution_order = order_tasks(&tasks).map_err(|k| PipelineError::new(Stage::Planning, k))?;
    Ok(TaskPlan {
        tasks,
        execution_order,
        goal_analysis: text(&reply.value, "goal_analysis").unwrap_or_default(),
    })
}

/// Rows of every task as JSON objects, columns in result order.
pub(super) fn rows_json(tasks: &[TaskExecution]) -> String {
    let rows: Vec<String> = tasks
        .iter()
        .filter_map(|t| t.result.as_ref())
        .flat_map(|r| {
            r.rows.iter().map(move |row| {
                let cells: Vec<String> = r
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| {
                        format!(
                            "{}: {}",
                            serde_json::to_string(c).expect("string"),
                            serde_json::to_string(v).expect("cell")
                        )
                    })
                    .collect();
                format!("{{{}}}", cells.join(", "))
            })
        })
        .collect();
    if rows.is_empty() {
        "[]".to_string()
    } else {
        format!("[\n  {}\n]", rows.join(",\n  "))
    }
}

pub fn reason(
    tasks: &[TaskExecution],
    query: &str,
    class: TaskClass,
    gateway: &Gateway,
    history: &[(String, String)],
    graph_context: Option<&str>,
) -> Result<ReasoningOutput, PipelineError> {
    let has_rows = tasks.iter().any(|t| t.row_count() > 0);
    let results = rows_json(tasks);
    let mut prompt = render(
        Stage::Reasoning,
        "reasoning",
        &[
            ("query_results", &results),
            ("user_query", query),
            ("task_type", &class.label()),
        ],
    )?;
    if let Some(ctx) = graph_context {
        prompt.push_str("\n\nGraph context around the concepts:\n");
        prompt.push_str(ctx);
    }
    let prompt = with_history(prompt, history);
    let spec = FieldSpec::new()
        .required("conclusion", FieldKind::Text)
        .optional("key_observations", FieldKind::TextList)
        .optional("inferred_relationships", FieldKind::TextList)
        .optional("logical_inferences", FieldKind::TextList)
        .optional("contextual_interpretation", FieldKind::Text)
        .optional("confidence_assessment", FieldKind::Percentage)
        .check(move |o| {
            let empty = o["conclusion"].as_str().is_none_or(|s| s.trim().is_empty());
            if has_rows && empty {
                Err("'conclusion' must not be empty when results are present".into())
            } else {
                Ok(())
            }
        });
    let reply = ask(gateway, Stage::Reasoning, &prompt, &spec)?;
    let v = &reply.value;
    let mut key_observations = list(v, "key_observations");
    if !has_rows && !key_observations.iter().any(|o| o == EMPTY_EVIDENCE) {
        key_observations.insert(0, EMPTY_EVIDENCE.to_string());
    }
    Ok(ReasoningOutput {
        key_observations,
        inferred_relationships: list(v, "inferred_relationships"),
        logical_inferences: list(v, "logical_inferences"),
        contextual_interpretation: text(v, "contextual_interpretation").unwrap_or_default(),
        conclusion: text(v, "conclusion").unwrap_or_default(),
        confidence: v.get("confidence_assessment").and_then(coerce_f64).unwrap_or(0.0),
    })
}

fn explanation(v: Option<&Json>) -> String {
    match v {
        None | Some(Json::Null) => String::new(),
        Some(Json::String(s)) => s.clone(),
        Some(Json::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, x)| match x {
                Json::String(s) => format!("{}. {s}", i + 1),
                other => format!("{}. {other}", i + 1),
            })
            .collect::<Vec<_>>()
            .join("\n"),
        Some(other) => other.to_string(),
    }
}

pub fn respond(
    reasoning: &ReasoningOutput,
    intent: &IntentClassification,
    query: &str,
    gateway: &Gateway,
    trace_ref: &str,
) -> Result<AgentResponse, PipelineError> {
    let reasoning_json = serde_json::to_string_pretty(reasoning).expect("reasoning serializes");
    let prompt = render(
        Stage::Response,
        "response",
        &[
            ("user_query", query),
            ("intent", intent.task_class.name()),
            ("reasoning_results", &reasoning_json),
            ("task_type", &intent.task_class.label()),
        ],
    )?;
    let spec = FieldSpec::new()
        .required("direct_answer", FieldKind::NonEmptyText)
        .optional("detailed_explanation", FieldKind::Any)
        .optional("examples", FieldKind::TextList)
        .optional("caveats", FieldKind::TextList)
        .optional("further_exploration", FieldKind::TextList);
    let reply = ask(gateway, Stage::Response, &prompt, &spec)?;
    let v = &reply.value;
    let mut caveats = list(v, "caveats");
    if reasoning.conclusion.trim().is_empty() && !caveats.iter().any(|c| c == INSUFFICIENT_EVIDENCE) {
        caveats.push(INSUFFICIENT_EVIDENCE.to_string());
    }
    Ok(AgentResponse {
        direct_answer: text(v, "direct_answer").expect("validated"),
        detailed_explanation: explanation(v.get("detailed_explanation")),
        examples: list(v, "examples"),
        caveats,
        further_exploration: list(v, "further_exploration"),
        trace_ref: trace_ref.to_string(),
    })
}
