//! Candidate triple extraction from document chunks under token budgets.

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::schema::normalize_label;
use super::{Document, ForgeError, RelationSchema, FORGE_SYSTEM_PROMPT};
use crate::llm::{coerce_f64, render_template, FieldKind, FieldSpec, Gateway};

/// Per-call token limits for the model input and output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budgets {
    pub input_tokens: usize,
    pub output_tokens: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            input_tokens: 2000,
            output_tokens: 400,
        }
    }
}

impl Budgets {
    /// Triple cap advertised in the prompt, at roughly 25 output tokens each.
    pub fn max_triples(&self) -> usize {
        (self.output_tokens / 25).max(1)
    }
}

/// Approximate token count: whitespace-separated words times 1.3, rounded up.
pub fn approx_tokens(text: &str) -> usize {
    (text.split_whitespace().count() * 13).div_ceil(10)
}

/// Largest word count whose approximate token count fits `tokens`.
pub fn words_within(tokens: usize) -> usize {
    tokens * 10 / 13
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateTriple {
    pub subject: String,
    /// Schema label as written in the schema.
    pub relation: String,
    pub object: String,
    pub source_doc: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TripleBatch {
    pub accepted: Vec<CandidateTriple>,
    /// Triples naming a relation outside the schema.
    pub dropped_off_schema: usize,
    /// Triples whose subject and object normalize to the same name.
    pub dropped_self_loops: usize,
}

fn relations_block(schema: &RelationSchema) -> String {
    schema
        .relations
        .iter()
        .map(|r| format!("- {}: {}", r.label, r.definition.trim()))
        .collect::<Vec<_>>()
        .join("\n")
}

fn render(
    doc_id: &str,
    chunk: &str,
    seeds: &[String],
    schema: &RelationSchema,
    budgets: &Budgets,
) -> Result<String, ForgeError> {
    let seeds = if seeds.is_empty() {
        "(none)".to_string()
    } else {
        seeds.join(", ")
    };
    Ok(render_template(
        "triple_extraction",
        &[
            ("relations", &relations_block(schema)),
            ("seed_entities", &seeds),
            ("doc_id", doc_id),
            ("chunk", chunk),
            ("max_triples", &budgets.max_triples().to_string()),
        ],
    )?)
}

/// Splits a document into word runs that keep the rendered extraction
/// prompt within the input budget.
pub fn chunk_document(
    doc: &Document,
    seeds: &[String],
    schema: &RelationSchema,
    budgets: &Budgets,
) -> Result<Vec<String>, ForgeError> {
    let overhead = approx_tokens(&render(&doc.id, "", seeds, schema, budgets)?);
    let room = words_within(budgets.input_tokens.saturating_sub(overhead));
    if room == 0 {
        return Err(ForgeError::BudgetTooSmall {
            overhead,
            budget: budgets.input_tokens,
        });
    }
    let words: Vec<&str> = doc.text.split_whitespace().collect();
    Ok(words.chunks(room).map(|c| c.join(" ")).collect())
}

fn text_field(obj: &serde_json::Map<String, Json>, key: &str) -> Option<String> {
    obj.get(key)
        .and_then(Json::as_str)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
}

/// One extraction call over one chunk. Off-schema relations and self loops
/// are dropped and counted; every kept triple records `doc_id`.
pub fn extract_triples(
    doc_id: &str,
    chunk: &str,
    seeds: &[String],
    schema: &RelationSchema,
    gateway: &Gateway,
    budgets: &Budgets,
) -> Result<TripleBatch, ForgeError> {
    if chunk.trim().is_empty() {
        return Err(ForgeError::EmptyChunk);
    }
    let prompt = render(doc_id, chunk, seeds, schema, budgets)?;
    let used = approx_tokens(&prompt);
    if used > budgets.input_tokens {
        return Err(ForgeError::Internal(format!(
            "chunk of doc {doc_id} renders to {used} tokens, over the {} budget",
            budgets.input_tokens
        )));
    }
    let mut req = gateway.request("triple_extraction", FORGE_SYSTEM_PROMPT, &prompt);
    req.max_tokens = u32::try_from(budgets.output_tokens).unwrap_or(u32::MAX);
    let spec = FieldSpec::new()
        .required("triples", FieldKind::ObjectList)
        .check(|obj| {
            let items = obj["triples"].as_array().map(Vec::as_slice).unwrap_or_default();
            for (i, t) in items.iter().enumerate() {
                let t = t.as_object().expect("checked by ObjectList");
                for key in ["subject", "relation", "object"] {
                    if text_field(t, key).is_none() {
                        return Err(format!("triple {i} lacks a non-empty '{key}'"));
                    }
                }
            }
            Ok(())
        });
    let reply = gateway.complete_structured(&req, &spec)?;
    let mut batch = TripleBatch::default();
    for t in reply.value["triples"].as_array().into_iter().flatten() {
        let t = t.as_object().expect("validated");
        let field = |k| text_field(t, k).expect("validated");
        let (subject, object) = (field("subject"), field("object"));
        let Some(relation) = schema.find(&field("relation")) else {
            batch.dropped_off_schema += 1;
            continue;
        };
        if normalize_label(&subject) == normalize_label(&object) {
            batch.dropped_self_loops += 1;
            continue;
        }
        batch.accepted.push(CandidateTriple {
            subject,
            relation: relation.label.clone(),
            object,
            source_doc: doc_id.to_string(),
            confidence: t.get("confidence").and_then(coerce_f64),
        });
    }
    Ok(batch)
}
