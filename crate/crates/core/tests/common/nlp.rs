//! Five-concept NLP graph and a stage-aware fake model answering the three
//! intent few-shot queries. Recording a run against the fake yields the
//! hash-keyed script stored under `fixtures/`.

use std::path::PathBuf;
use std::sync::Arc;

use kgpilot_core::embedding::HashEmbedder;
use kgpilot_core::graph::{EdgeRecord, KnowledgeGraph, Mutation, NodeRecord};
use kgpilot_core::llm::{ChatRequest, FnProvider, Gateway, LlmError, LlmProvider, ScriptedProvider};
use kgpilot_core::pipeline::{FixedClock, Pipeline, PipelineConfig, UserQuery};

pub const EX1: &str = "Is word embedding a prerequisite for understanding BERT?";
pub const EX2: &str = "What should I learn before diving into transformer architectures?";
pub const EX3: &str = "How do I progress from basic NLP to advanced natural language generation?";

/// (query, expected class) for the three few-shot examples.
pub const EXAMPLES: [(&str, u8); 3] = [(EX1, 1), (EX2, 2), (EX3, 3)];

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn nlp_graph() -> KnowledgeGraph {
    let concept = |id: &str, name: &str| {
        Mutation::CreateNode(
            NodeRecord::new(id)
                .with_label("Concept")
                .with_prop("name", name)
                .with_prop("domain", "NLP"),
        )
    };
    let pre = |id: &str, s: &str, d: &str| Mutation::CreateEdge(EdgeRecord::new(id, s, "prerequisite_of", d));
    let mut g = KnowledgeGraph::new();
    g.mutate(&[
        concept("basic_nlp", "Basic NLP"),
        concept("word_embeddings", "Word Embeddings"),
        concept("transformer_architecture", "Transformer Architecture"),
        concept("bert", "BERT"),
        concept("natural_language_generation", "Natural Language Generation"),
        pre("p1", "basic_nlp", "word_embeddings"),
        pre("p2", "word_embeddings", "transformer_architecture"),
        pre("p3", "word_embeddings", "bert"),
        pre("p4", "transformer_architecture", "bert"),
        pre("p5", "transformer_architecture", "natural_language_generation"),
    ])
    .unwrap();
    g
}

fn which(prompt: &str, tag: &str) -> Option<usize> {
    EXAMPLES.iter().position(|(q, _)| {
        if tag == "intent" {
            prompt.contains(&format!("Query: {q}"))
        } else {
            prompt.contains(q)
        }
    })
}

fn intent_reply(k: usize) -> String {
    let (class, concepts, why) = match k {
        0 => (
            "1",
            r#"["word embedding", "BERT"]"#,
            "Asks whether a prerequisite relation holds between two concepts.",
        ),
        1 => (
            "2",
            r#"["transformer architectures"]"#,
            "Asks what to learn before one concept.",
        ),
        _ => (
            "3",
            r#"["basic NLP", "natural language generation"]"#,
            "Asks for a learning path between two concepts.",
        ),
    };
    format!(
        "```json\n{{\n  \"linguistic_analysis\": \"question form\",\n  \"task_classification\": \"{class}\",\n  \"confidence\": \"95\",\n  \"key_concepts\": {concepts},\n  \"reasoning\": \"{why}\"\n}}\n```"
    )
}

fn extraction_reply(k: usize) -> String {
    match k {
        0 => r#"{"concept_1": "word embeddings", "concept_2": "BERT", "relation": "prerequisite_of", "relation_description": "whether one must be learned before the other"}"#.into(),
        1 => r#"{"target_concept": "transformer architecture", "domain": "NLP"}"#.into(),
        _ => r#"{"entities": ["basic NLP", "natural language generation"], "relations": [], "domain": "NLP"}"#.into(),
    }
}

fn planning_reply(k: usize) -> String {
    match k {
        0 => r#"{"goal_analysis": "Verify a prerequisite relation", "tasks": [{"id": 1, "description": "Check whether word embeddings is a prerequisite of BERT", "dependencies": []}]}"#.into(),
        1 => r#"{"goal_analysis": "List prerequisites", "tasks": [{"id": 1, "description": "Locate transformer architecture", "dependencies": []}, {"id": 2, "description": "Collect its transitive prerequisites", "dependencies": [1]}]}"#.into(),
        _ => r#"{"goal_analysis": "Build a learning path", "tasks": [
            {"id": 1, "description": "Identify key concepts in basic NLP", "dependencies": []},
            {"id": 2, "description": "Locate 'natural language generation' in the knowledge graph", "dependencies": [1]},
            {"id": 3, "description": "Find intermediate concepts connecting basic NLP to natural language generation", "dependencies": [2]},
            {"id": 4, "description": "Order concepts based on complexity and dependencies", "dependencies": [3]},
            {"id": 5, "description": "Construct a step-by-step learning path", "dependencies": [4]}
        ]}"#
        .into(),
    }
}

fn reasoning_reply(k: usize) -> String {
    match k {
        0 => r#"{"key_observations": ["A direct edge links word_embeddings to bert"], "inferred_relationships": ["word_embeddings prerequisite_of bert"], "logical_inferences": ["Word embeddings should be learned before BERT"], "contextual_interpretation": "The graph records the prerequisite directly", "confidence_assessment": "95", "conclusion": "Word embeddings are a direct prerequisite of BERT."}"#.into(),
        1 => r#"{"key_observations": ["word_embeddings is one step before", "basic_nlp is two steps before"], "inferred_relationships": ["basic_nlp prerequisite_of word_embeddings"], "logical_inferences": ["Start with basic NLP, then word embeddings"], "contextual_interpretation": "Prerequisites ordered nearest first", "confidence_assessment": "90", "conclusion": "Learn basic NLP and then word embeddings before transformer architectures."}"#.into(),
        _ => r#"{"key_observations": ["The path has four concepts"], "inferred_relationships": ["basic_nlp leads to natural_language_generation through word_embeddings and transformer_architecture"], "logical_inferences": ["Each step builds on the previous one"], "contextual_interpretation": "A learning sequence", "confidence_assessment": "85", "conclusion": "Progress from basic NLP to word embeddings, then transformer architecture, then natural language generation."}"#.into(),
    }
}

fn response_reply(k: usize) -> String {
    match k {
        0 => r#"{"direct_answer": "Yes, word embeddings are a prerequisite for understanding BERT.", "detailed_explanation": ["BERT builds contextual representations on top of token embeddings.", "The graph links word embeddings directly to BERT.", "Transformer architecture is a second prerequisite."], "examples": ["word2vec"], "caveats": [], "further_exploration": ["Transformer Architecture"]}"#.into(),
        1 => r#"{"direct_answer": "Learn basic NLP and word embeddings first.", "detailed_explanation": "1. Basic NLP\n2. Word Embeddings", "examples": [], "caveats": [], "further_exploration": ["BERT"]}"#.into(),
        _ => r#"{"direct_answer": "Basic NLP, then word embeddings, then transformer architecture, then natural language generation.", "detailed_explanation": "- Basic NLP\n- Word Embeddings\n- Transformer Architecture\n- Natural Language Generation", "examples": [], "caveats": [], "further_exploration": []}"#.into(),
    }
}

/// The fake model: picks a reply by agent tag and example query.
pub fn stage_reply(req: &ChatRequest) -> Result<String, LlmError> {
    let k = which(&req.user, &req.tag).ok_or_else(|| LlmError::ProviderUnavailable("unknown query".into()))?;
    Ok(match req.tag.as_str() {
        "intent" => intent_reply(k),
        "extraction" => extraction_reply(k),
        "planning" => planning_reply(k),
        "reasoning" => reasoning_reply(k),
        "response" => response_reply(k),
        other => return Err(LlmError::ProviderUnavailable(format!("no fake for {other}"))),
    })
}

pub fn query(text: &str) -> UserQuery {
    UserQuery {
        session_id: "s1".into(),
        text: text.into(),
        received_at: 1_700_000_000_000,
    }
}

pub fn pipeline(provider: Arc<dyn LlmProvider>) -> Pipeline {
    Pipeline::new(
        Gateway::new(provider),
        Arc::new(HashEmbedder::default()),
        PipelineConfig::default(),
    )
    .with_clock(Arc::new(FixedClock(0)))
}

/// Runs the three examples against the fake model and keeps every
/// (prompt, reply) pair as a hash-keyed script.
pub fn record_script() -> ScriptedProvider {
    let g = nlp_graph();
    let mut script = ScriptedProvider::new();
    for (q, _) in EXAMPLES {
        // A fresh pipeline per example keeps session history out of the prompts.
        let p = pipeline(Arc::new(FnProvider::new("fake", stage_reply)));
        p.run(&query(q), &g).expect("fake run succeeds");
        for r in p.gateway().log().records() {
            script.insert(&r.request.user, r.reply.expect("fake replies"));
        }
    }
    script
}
