//! Fourteen approved records (two per class) over the NLP graph and a fake
//! model that classifies each by a lookup table. A query tagged `[fail]`
//! gets an unparseable graph query every time, so its task fails.

use std::path::PathBuf;
use std::sync::Arc;

use kgpilot_core::embedding::HashEmbedder;
use kgpilot_core::evalkit::EvalRecord;
use kgpilot_core::llm::{ChatRequest, FnProvider, Gateway, LlmError};
use kgpilot_core::pipeline::{FixedClock, Pipeline, PipelineConfig, TaskClass};

pub const RECORDS: [(&str, u8); 14] = [
    ("Is word embedding related to BERT?", 1),
    ("Does BERT depend on transformer architecture?", 1),
    ("What should I study before BERT?", 2),
    ("Which topics come before natural language generation?", 2),
    ("How do I get from basic NLP to BERT?", 3),
    (
        "What is a learning path from word embeddings to natural language generation?",
        3,
    ),
    ("Group the NLP concepts into themes.", 4),
    ("Which NLP concepts belong together?", 4),
    ("What links might be missing around BERT?", 5),
    ("Which relations around word embeddings are absent from the graph?", 5),
    (
        "Give me a research idea combining BERT and natural language generation.",
        6,
    ),
    ("Suggest a project idea about word embeddings.", 6),
    ("List every concept in the graph.", 7),
    ("Show all concept names.", 7),
];

pub fn eval_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/eval")
}

pub fn records() -> Vec<EvalRecord> {
    RECORDS
        .iter()
        .enumerate()
        .map(|(i, (q, c))| EvalRecord::manual(format!("r{:02}", i + 1), *q, TaskClass::try_from(*c).unwrap(), "NLP"))
        .collect()
}

fn class_of(prompt: &str) -> u8 {
    RECORDS
        .iter()
        .find(|(q, _)| prompt.contains(&format!("Query: {q}")))
        .map_or(7, |(_, c)| *c)
}

pub fn fake(req: &ChatRequest) -> Result<String, LlmError> {
    let p = &req.user;
    Ok(match req.tag.as_str() {
        "intent" => format!(
            r#"{{"task_classification": {}, "confidence": 90, "key_concepts": [], "reasoning": "table lookup"}}"#,
            class_of(p)
        ),
        "extraction" => r#"{"entities": ["word embeddings", "BERT"], "concept_1": "word embeddings", "concept_2": "BERT", "target_concept": "BERT", "relations": [], "domain": "NLP"}"#.into(),
        "planning" => r#"{"tasks": [{"id": 1, "description": "Answer from the graph", "dependencies": []}]}"#.into(),
        "execution" if p.contains("[fail]") => r#"{"cypher_query": "MATCH (c:Concept RETURN c"}"#.into(),
        "execution" => r#"{"cypher_query": "MATCH (c:Concept) RETURN c.name ORDER BY c.name"}"#.into(),
        "reasoning" => r#"{"key_observations": [], "inferred_relationships": [], "logical_inferences": [], "contextual_interpretation": "", "confidence_assessment": "80", "conclusion": "The graph answers the question."}"#.into(),
        "response" => r#"{"direct_answer": "Here is what the graph shows.", "detailed_explanation": "", "examples": [], "caveats": [], "further_exploration": []}"#.into(),
        other => return Err(LlmError::ProviderUnavailable(format!("no fake for {other}"))),
    })
}

pub fn pipeline() -> Pipeline {
    let gw = Gateway::new(Arc::new(FnProvider::new("eval-fake", fake)));
    Pipeline::new(gw, Arc::new(HashEmbedder::default()), PipelineConfig::default()).with_clock(Arc::new(FixedClock(0)))
}
