//! Synthetic query generation from the per-class question templates.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{EvalError, EvalRecord, RecordSource, ReviewStatus};
use crate::llm::{render_template, sha256_hex, Gateway};
use crate::pipeline::TaskClass;

const GENERATOR_SYSTEM_PROMPT: &str = "You write evaluation questions and output only the numbered list requested.";
const PER_CALL: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generated {
    pub records: Vec<EvalRecord>,
    /// Questions dropped as exact repeats, in the order seen.
    pub duplicates: Vec<String>,
}

pub fn record_id(class: TaskClass, query: &str) -> String {
    format!("c{}-{}", class.number(), &sha256_hex(query)[..10])
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    for (open, close) in [('"', '"'), ('\u{201c}', '\u{201d}'), ('\'', '\'')] {
        if let Some(inner) = s.strip_prefix(open).and_then(|r| r.strip_suffix(close)) {
            return inner.trim();
        }
    }
    s
}

/// Items of a numbered (`1.` / `1)`) or bulleted list, with any
/// `Question:` prefix, bold markers and surrounding quotes removed.
pub fn parse_question_list(reply: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    for line in reply.lines() {
        let l = line.trim();
        let digits = l.chars().take_while(char::is_ascii_digit).count();
        let body = if digits > 0 {
            match l[digits..].strip_prefix('.').or_else(|| l[digits..].strip_prefix(')')) {
                Some(rest) => rest,
                None => continue,
            }
        } else if let Some(rest) = l.strip_prefix("- ").or_else(|| l.strip_prefix("* ")) {
            rest
        } else {
            continue;
        };
        let body = body.replace("**", "");
        let body = body.trim();
        let body = body.strip_prefix("Question:").unwrap_or(body);
        let q = unquote(body);
        if !q.is_empty() {
            out.push(q.to_string());
        }
    }
    if out.is_empty() {
        Err("no numbered questions found".into())
    } else {
        Ok(out)
    }
}

/// Asks the class template for questions in batches of ten until `count`
/// candidates were requested. Exact repeats are dropped and reported, not
/// replaced, so a batch with one repeat yields nine records.
pub fn generate_queries(
    class: TaskClass,
    count: usize,
    domain: &str,
    gateway: &Gateway,
) -> Result<Generated, EvalError> {
    let base = render_template(&format!("querygen_{}", class.number()), &[])?;
    let mut seen = BTreeSet::new();
    let mut records = Vec::new();
    let mut duplicates = Vec::new();
    for round in 0..count.div_ceil(PER_CALL) {
        let prompt = if round == 0 {
            base.clone()
        } else {
            let avoid: Vec<String> = records.iter().map(|r: &EvalRecord| format!("- {}", r.query)).collect();
            format!("{base}\n\nDo not repeat any of these questions:\n{}", avoid.join("\n"))
        };
        let req = gateway.request("querygen", GENERATOR_SYSTEM_PROMPT, &prompt);
        for q in gateway.complete_parsed(&req, parse_question_list)? {
            if !seen.insert(q.clone()) {
                tracing::info!(question = %q, "dropping duplicate generated question");
                duplicates.push(q);
                continue;
            }
            records.push(EvalRecord {
                id: record_id(class, &q),
                query: q,
                gold_class: class,
                domain: domain.to_string(),
                source: RecordSource::Generated,
                review_status: ReviewStatus::Pending,
            });
        }
    }
    records.truncate(count);
    Ok(Generated { records, duplicates })
}
