//! Agent-level behavior: extraction schemas, planning errors, the query
//! refinement loop, reasoning and response contracts, free-form routing.

mod common;

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use common::nlp;
use kgpilot_core::embedding::{EntityLinker, HashEmbedder, LinkResult};
use kgpilot_core::gql;
use kgpilot_core::graph::{EdgeRecord, KnowledgeGraph, Mutation, NodeRecord};
use kgpilot_core::llm::{render_template, FnProvider, Gateway, ScriptedProvider};
use kgpilot_core::pipeline::*;

/// A fake model answering by agent tag.
fn by_tag(replies: &[(&str, &str)]) -> Gateway {
    let map: HashMap<String, String> = replies.iter().map(|(t, r)| (t.to_string(), r.to_string())).collect();
    Gateway::new(Arc::new(FnProvider::new("by-tag", move |req| {
        map.get(&req.tag)
            .cloned()
            .ok_or_else(|| kgpilot_core::llm::LlmError::ProviderUnavailable(req.tag.clone()))
    })))
}

fn linker() -> EntityLinker<f64> {
    EntityLinker::new(Arc::new(HashEmbedder::default()))
}

fn intent(class: u8) -> IntentClassification {
    IntentClassification {
        task_class: TaskClass::try_from(class).unwrap(),
        confidence: 95.0,
        key_concepts: vec![],
        reasoning: String::new(),
        downgraded_from: None,
    }
}

fn papers() -> KnowledgeGraph {
    let paper = |id: &str, title: &str, year: i64| {
        Mutation::CreateNode(
            NodeRecord::new(id)
                .with_label("Paper")
                .with_prop("title", title)
                .with_prop("year", year),
        )
    };
    let mut g = KnowledgeGraph::new();
    g.mutate(&[
        paper("bert", "BERT", 2018),
        paper("gpt3", "GPT-3", 2020),
        paper("roberta", "RoBERTa", 2019),
        paper("elmo", "ELMo", 2018),
        Mutation::CreateEdge(EdgeRecord::new("c1", "gpt3", "CITES", "bert")),
        Mutation::CreateEdge(EdgeRecord::new("c2", "roberta", "CITES", "bert")),
        Mutation::CreateEdge(EdgeRecord::new("c3", "bert", "CITES", "elmo")),
    ])
    .unwrap();
    g
}

const A4_QUERY: &str = "MATCH (p1:Paper)-[:CITES]->(p2:Paper {title: 'BERT'})\nWHERE p1.year > 2018\nRETURN p1.title, p1.year\nORDER BY p1.year DESC";

fn cypher_reply(q: &str) -> String {
    serde_json::json!({"query_objective": "find citing papers", "cypher_query": q}).to_string()
}

fn freestyle_extraction(mentions: &[&str]) -> ConceptExtraction {
    ConceptExtraction {
        task_class: TaskClass::Freestyle,
        entities: mentions
            .iter()
            .map(|m| LinkedMention {
                mention: m.to_string(),
                link: LinkResult {
                    mention: m.to_string(),
                    node_id: None,
                    score: 0.0,
                    candidates: vec![],
                },
            })
            .collect(),
        relations: vec![],
        domain: None,
        relation_description: None,
    }
}

fn task(description: &str) -> TaskNode {
    TaskNode {
        id: 1,
        description: description.into(),
        dependencies: vec![],
    }
}

#[test]
fn extraction_generic_schema_example() {
    let g = nlp::nlp_graph();
    let gw = by_tag(&[(
        "extraction",
        r#"{"entities": ["BERT", "transformer architecture"], "relations": [{"type": "relates_to", "source": "BERT", "target": "transformer architecture"}], "domain": "NLP"}"#,
    )]);
    let ex = extract_concepts(
        "How does BERT relate to transformer architecture in NLP?",
        &intent(1),
        &g,
        &gw,
        &linker(),
    )
    .unwrap();
    assert_eq!(ex.mentions(), ["BERT", "transformer architecture"]);
    assert_eq!(ex.relations.len(), 1);
    assert_eq!(ex.relations[0].relation_type, "relates_to");
    assert_eq!(ex.domain.as_deref(), Some("NLP"));
    assert_eq!(ex.linked_ids(), ["bert", "transformer_architecture"]);
}

#[test]
fn exact_name_links_with_full_score() {
    let g = nlp::nlp_graph();
    let gw = by_tag(&[("extraction", r#"{"target_concept": "BERT", "domain": "NLP"}"#)]);
    let ex = extract_concepts("prerequisites for BERT", &intent(2), &g, &gw, &linker()).unwrap();
    assert_eq!(ex.entities[0].node_id(), Some("bert"));
    assert_eq!(ex.entities[0].link.score, 1.0);
}

#[test]
fn unlinked_mentions_are_kept() {
    let g = nlp::nlp_graph();
    let gw = by_tag(&[("extraction", r#"{"entities": ["quantum chromodynamics", "!!!"]}"#)]);
    let ex = extract_concepts("q", &intent(5), &g, &gw, &linker()).unwrap();
    assert_eq!(ex.entities.len(), 2);
    assert!(ex.entities.iter().all(|e| e.node_id().is_none()));
}

#[test]
fn extraction_minimums_per_class() {
    let g = nlp::nlp_graph();
    let gw = by_tag(&[("extraction", r#"{"entities": []}"#)]);
    let cases = [
        (1, "extraction: class 1 requires two concepts"),
        (2, "extraction: class 2 requires a target concept"),
        (3, "extraction: class 3 requires two concepts"),
        (5, "extraction: class 5 requires at least one concept"),
    ];
    for (class, message) in cases {
        let err = extract_concepts("q", &intent(class), &g, &gw, &linker()).unwrap_err();
        assert_eq!(err.to_string(), message);
    }
    for class in [4, 6, 7] {
        assert!(extract_concepts("q", &intent(class), &g, &gw, &linker()).is_ok());
    }
}

#[test]
fn low_confidence_downgrades_to_freestyle() {
    let gw = by_tag(&[("intent", r#"{"task_classification": 5, "confidence": "40%"}"#)]);
    let i = classify_intent("q", &gw, &[], 60.0).unwrap();
    assert_eq!(i.task_class, TaskClass::Freestyle);
    assert_eq!(i.downgraded_from, Some(TaskClass::SubgraphCompletion));
    let gw = by_tag(&[("intent", r#"{"task_classification": 9, "confidence": 99}"#)]);
    let err = classify_intent("q", &gw, &[], 60.0).unwrap_err();
    assert_eq!(err.stage, Stage::Intent);
    assert!(matches!(err.kind, FailureKind::Llm(_)));
}

fn plan_err(reply: &str) -> PipelineError {
    let gw = by_tag(&[("planning", reply)]);
    let ex = freestyle_extraction(&["a"]);
    plan_tasks("q", &intent(3), &ex, &gw).unwrap_err()
}

#[test]
fn planning_rejects_cycles_and_dangling_dependencies() {
    let e = plan_err(
        r#"{"tasks": [{"id": 1, "description": "a", "dependencies": [2]}, {"id": 2, "description": "b", "dependencies": [1]}]}"#,
    );
    assert_eq!(
        (e.stage, e.kind),
        (Stage::Planning, FailureKind::CyclicPlan(vec![1, 2]))
    );
    let e = plan_err(r#"{"tasks": [{"id": 1, "description": "a", "dependencies": [7]}]}"#);
    assert_eq!(e.kind, FailureKind::DanglingDependency { task: 1, missing: 7 });
    let gw = by_tag(&[("planning", r#"{"tasks": [{"id": 1, "description": "only"}]}"#)]);
    let plan = plan_tasks("q", &intent(3), &freestyle_extraction(&[]), &gw).unwrap();
    assert_eq!(plan.execution_order, [1]);
}

#[test]
fn deterministic_path_on_chain() {
    let mut g = KnowledgeGraph::new();
    g.mutate(&[
        Mutation::CreateNode(NodeRecord::new("a")),
        Mutation::CreateNode(NodeRecord::new("b")),
        Mutation::CreateNode(NodeRecord::new("c")),
        Mutation::CreateEdge(EdgeRecord::new("e1", "a", "r", "b")),
        Mutation::CreateEdge(EdgeRecord::new("e2", "b", "r", "c")),
    ])
    .unwrap();
    let gw = by_tag(&[("extraction", r#"{"entities": ["a", "c"]}"#)]);
    let ex = extract_concepts("path from a to c", &intent(3), &g, &gw, &linker()).unwrap();
    let cfg = PipelineConfig::default();
    let ctx = TaskContext {
        class: TaskClass::PathSearching,
        extraction: &ex,
        completed: &[],
        terminal: true,
        config: &cfg,
    };
    let done = execute_task(&task("path from a to c"), &ctx, &g, &gw).unwrap();
    let nodes: Vec<String> = done.result.unwrap().rows.iter().map(|r| r[1].to_string()).collect();
    assert_eq!(nodes, ["a", "b", "c"]);
    assert_eq!(done.operation.as_deref(), Some("find_path(a, c, undirected)"));
}

fn freestyle_ctx<'a>(ex: &'a ConceptExtraction, cfg: &'a PipelineConfig) -> TaskContext<'a> {
    TaskContext {
        class: TaskClass::Freestyle,
        extraction: ex,
        completed: &[],
        terminal: true,
        config: cfg,
    }
}

fn base_prompt(g: &KnowledgeGraph, description: &str, ex: &ConceptExtraction) -> String {
    let concepts = serde_json::to_string(&ex.mentions()).unwrap();
    render_template(
        "kg_interaction",
        &[
            ("task", description),
            ("concepts", &concepts),
            ("schema", &schema_json(g)),
        ],
    )
    .unwrap()
}

#[test]
fn broken_query_is_refined_once() {
    let g = papers();
    let ex = freestyle_extraction(&["BERT", "citation", "publication date"]);
    let t = task("Find all papers that cite BERT and were published after 2018");
    let base = base_prompt(&g, &t.description, &ex);
    let broken = "MATCH (p1:Paper)-[:CITES->(p2) RETURN p1";
    let err = gql::parse(broken).unwrap_err().to_string();
    let script = ScriptedProvider::new()
        .reply_to(&base, cypher_reply(broken))
        .reply_to(&refine_prompt(&base, broken, &err), cypher_reply(A4_QUERY));
    let gw = Gateway::new(Arc::new(script));
    let cfg = PipelineConfig::default();
    let done = execute_task(&t, &freestyle_ctx(&ex, &cfg), &g, &gw).unwrap();
    assert_eq!(done.mode, ExecutionMode::Llm);
    assert_eq!(done.attempts.len(), 2);
    assert_eq!(done.attempts[0].error.as_deref(), Some(err.as_str()));
    assert_eq!(done.attempts[1].query, A4_QUERY);
    let rows = done.result.unwrap().rows;
    let titles: Vec<String> = rows.iter().map(|r| r[0].to_string()).collect();
    assert_eq!(titles, ["GPT-3", "RoBERTa"]);
}

#[test]
fn refinement_budget_exhaustion_is_task_failed() {
    let g = papers();
    let ex = freestyle_extraction(&[]);
    let calls = Arc::new(AtomicUsize::new(0));
    let counter = calls.clone();
    let gw = Gateway::new(Arc::new(FnProvider::new("broken", move |_| {
        let n = counter.fetch_add(1, Ordering::SeqCst);
        Ok(cypher_reply(&format!("MATCH (n{n} RETURN n")))
    })));
    let cfg = PipelineConfig::default();
    let err = execute_task(&task("anything"), &freestyle_ctx(&ex, &cfg), &g, &gw).unwrap_err();
    match err.kind {
        FailureKind::TaskFailed { task, attempts } => {
            assert_eq!(task, 1);
            assert_eq!(attempts.len(), 3);
            assert!(attempts.iter().all(|a| a.error.is_some()));
            assert_eq!(attempts[2].query, "MATCH (n2 RETURN n");
        }
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(calls.load(Ordering::SeqCst), 3);
}

#[test]
fn empty_result_is_refined_once_then_accepted() {
    let g = papers();
    let ex = freestyle_extraction(&[]);
    let empty = "MATCH (p:Paper) WHERE p.year > 2050 RETURN p.title";
    let gw = by_tag(&[("execution", &cypher_reply(empty))]);
    let cfg = PipelineConfig::default();
    let done = execute_task(&task("future papers"), &freestyle_ctx(&ex, &cfg), &g, &gw).unwrap();
    assert_eq!(done.attempts.len(), 2);
    assert_eq!(done.row_count(), 0);
    assert!(done.attempts.iter().all(|a| a.error.is_none()));
}

#[test]
fn reasoning_serializes_rows_and_flags_empty_evidence() {
    let g = papers();
    let q = gql::parse(A4_QUERY).unwrap();
    let result = gql::execute_read(&q, &g).unwrap();
    let done = TaskExecution {
        task_id: 1,
        description: "t".into(),
        mode: ExecutionMode::Llm,
        operation: None,
        attempts: vec![],
        result: Some(result),
        warnings: vec![],
    };
    let reply = r#"{"key_observations": ["Three significant papers"], "inferred_relationships": [], "logical_inferences": [], "contextual_interpretation": "timeline", "confidence_assessment": "80", "conclusion": "The increasing citation counts over time suggest growing impact."}"#;
    let gw = by_tag(&[("reasoning", reply)]);
    let out = reason(
        std::slice::from_ref(&done),
        "How has the impact of transformer models evolved over time?",
        TaskClass::Freestyle,
        &gw,
        &[],
        None,
    )
    .unwrap();
    assert!(out.conclusion.contains("growing impact"));
    assert_eq!(out.confidence, 80.0);
    let prompt = &gw.log().records()[0].request.user;
    assert!(prompt.contains(
        "[\n  {\"p1.title\": \"GPT-3\", \"p1.year\": 2020},\n  {\"p1.title\": \"RoBERTa\", \"p1.year\": 2019}\n]"
    ));

    // Rows present but no conclusion: rejected on every attempt.
    let gw = by_tag(&[("reasoning", r#"{"conclusion": ""}"#)]);
    let err = reason(std::slice::from_ref(&done), "q", TaskClass::Freestyle, &gw, &[], None).unwrap_err();
    assert_eq!(err.stage, Stage::Reasoning);

    let mut empty = done.clone();
    empty.result.as_mut().unwrap().rows.clear();
    let out = reason(&[empty], "q", TaskClass::Freestyle, &gw, &[], None).unwrap();
    assert!(out.key_observations.contains(&EMPTY_EVIDENCE.to_string()));
}

#[test]
fn response_example_and_degraded_path() {
    let reasoning = ReasoningOutput {
        key_observations: vec!["BERT uses bidirectional context, GPT uses unidirectional".into()],
        inferred_relationships: vec![],
        logical_inferences: vec![],
        contextual_interpretation: String::new(),
        conclusion: "They differ in context processing, use and objective.".into(),
        confidence: 95.0,
    };
    let reply = r#"{"direct_answer": "BERT and GPT differ in how they process context.", "detailed_explanation": "1. Context Processing: BERT uses bidirectional context, GPT is unidirectional.\n2. Primary Use: BERT for understanding, GPT for generation.\n3. Training Objective: masked words versus next word.", "examples": [], "caveats": [], "further_exploration": ["T5"]}"#;
    let gw = by_tag(&[("response", reply)]);
    let a = respond(
        &reasoning,
        &intent(7),
        "What are the key differences between BERT and GPT models?",
        &gw,
        "trace-1",
    )
    .unwrap();
    assert_eq!(a.trace_ref, "trace-1");
    let points = a.explanation_points();
    assert_eq!(points.len(), 3);
    assert!(points[0].starts_with("Context Processing: BERT uses bidirectional context"));
    assert!(a.caveats.is_empty());

    let empty = ReasoningOutput {
        conclusion: String::new(),
        ..reasoning
    };
    let a = respond(&empty, &intent(7), "q", &gw, "t").unwrap();
    assert!(!a.direct_answer.is_empty());
    assert_eq!(a.caveats, [INSUFFICIENT_EVIDENCE]);
}

#[test]
fn freestyle_skips_planning_and_runs_one_generated_query() {
    let g = papers();
    let gw = by_tag(&[
        (
            "intent",
            r#"{"task_classification": 4, "confidence": 30, "key_concepts": ["BERT"]}"#,
        ),
        ("extraction", r#"{"entities": ["BERT"], "relations": []}"#),
        ("execution", &cypher_reply(A4_QUERY)),
        (
            "reasoning",
            r#"{"conclusion": "Two later papers cite BERT.", "confidence_assessment": 70}"#,
        ),
        ("response", r#"{"direct_answer": "GPT-3 and RoBERTa."}"#),
    ]);
    let p = Pipeline::new(gw, Arc::new(HashEmbedder::default()), PipelineConfig::default())
        .with_clock(Arc::new(FixedClock(5)));
    let t = p.run(&nlp::query("Who cites BERT after 2018?"), &g).unwrap();
    let i = t.intent.as_ref().unwrap();
    assert_eq!(
        (i.task_class, i.downgraded_from),
        (TaskClass::Freestyle, Some(TaskClass::ConceptClustering))
    );
    assert!(t.plan_skipped && t.plan.is_none());
    assert_eq!(t.tasks.len(), 1);
    assert_eq!(t.tasks[0].mode, ExecutionMode::Llm);
    assert_eq!(t.tasks[0].attempts[0].query, A4_QUERY);
    assert!(t.to_json().contains(&serde_json::to_string(A4_QUERY).unwrap()));
    let stages: Vec<&str> = t.llm_calls.iter().map(|c| c.stage.as_str()).collect();
    assert_eq!(stages, ["intent", "extraction", "execution", "reasoning", "response"]);
}

#[test]
fn failed_task_attempts_stay_in_the_trace() {
    let g = papers();
    let gw = by_tag(&[
        ("intent", r#"{"task_classification": 7, "confidence": 90}"#),
        ("extraction", r#"{"entities": []}"#),
        ("execution", &cypher_reply("RETURN")),
    ]);
    let p = Pipeline::new(gw, Arc::new(HashEmbedder::default()), PipelineConfig::default());
    let err = p.run(&nlp::query("anything"), &g).unwrap_err();
    assert_eq!(err.error.stage, Stage::Execution);
    assert_eq!(err.trace.tasks[0].attempts.len(), 3);
    assert_eq!(
        err.trace.error.as_ref().unwrap().cause,
        "task 1 failed after 3 attempts"
    );
    assert!(err.trace.response.is_none());
}

#[test]
fn llm_mode_routes_algorithmic_classes_through_generation() {
    let g = nlp::nlp_graph();
    let gw = by_tag(&[(
        "execution",
        &cypher_reply("MATCH (a:Concept {name: 'BERT'}) RETURN a.name"),
    )]);
    let ex = freestyle_extraction(&["BERT"]);
    let cfg = PipelineConfig {
        query_mode: QueryMode::Llm,
        ..PipelineConfig::default()
    };
    let ctx = TaskContext {
        class: TaskClass::RelationJudgment,
        extraction: &ex,
        completed: &[],
        terminal: true,
        config: &cfg,
    };
    assert_eq!(ctx.mode(), ExecutionMode::Llm);
    let done = execute_task(&task("find BERT"), &ctx, &g, &gw).unwrap();
    assert_eq!(done.row_count(), 1);
    let det = PipelineConfig {
        query_mode: QueryMode::Deterministic,
        ..PipelineConfig::default()
    };
    let ctx6 = TaskContext {
        class: TaskClass::IdeaHamster,
        config: &det,
        ..ctx
    };
    assert_eq!(ctx6.mode(), ExecutionMode::Deterministic);
}
