//! Relation schemas: the allowed edge types and their definitions.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::{Document, ForgeError, FORGE_SYSTEM_PROMPT};
use crate::embedding::tokens;
use crate::llm::{extract_json_object, render_template, Gateway};

pub const MAX_RELATIONS: usize = 32;

/// English legal relations (ten labels).
pub const UK_LEGISLATION_SCHEMA: &str = include_str!("../../schemas/uk_legislation.json");
/// Japanese medical relations (thirteen labels, romanized slugs).
pub const JAPANESE_MEDICAL_SCHEMA: &str = include_str!("../../schemas/japanese_medical.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationDef {
    pub label: String,
    pub definition: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example: Option<String>,
    /// Edge label used in the graph; derived from `label` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slug: Option<String>,
}

impl RelationDef {
    pub fn new(label: impl Into<String>, definition: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            definition: definition.into(),
            example: None,
            slug: None,
        }
    }

    pub fn edge_label(&self) -> String {
        match &self.slug {
            Some(s) => s.clone(),
            None => tokens(&self.label).join("_"),
        }
    }
}

/// Lower-cased alphanumeric runs joined by single spaces, so "Cites Act",
/// "cites_act" and "CITES-ACT" compare equal.
pub fn normalize_label(label: &str) -> String {
    tokens(label).join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSchema {
    pub relations: Vec<RelationDef>,
}

impl RelationSchema {
    pub fn new(relations: Vec<RelationDef>) -> Result<Self, ForgeError> {
        let s = Self { relations };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ForgeError> {
        let n = self.relations.len();
        if n == 0 || n > MAX_RELATIONS {
            return Err(ForgeError::InvalidSchema(format!(
                "{n} relations; expected 1 to {MAX_RELATIONS}"
            )));
        }
        let mut labels = BTreeSet::new();
        let mut slugs = BTreeSet::new();
        for r in &self.relations {
            let key = normalize_label(&r.label);
            if key.is_empty() {
                return Err(ForgeError::InvalidSchema(format!(
                    "label '{}' has no letters or digits",
                    r.label
                )));
            }
            if !labels.insert(key) {
                return Err(ForgeError::InvalidSchema(format!("duplicate label '{}'", r.label)));
            }
            if r.definition.trim().is_empty() {
                return Err(ForgeError::InvalidSchema(format!(
                    "label '{}' has an empty definition",
                    r.label
                )));
            }
            let slug = r.edge_label();
            if slug.is_empty() || !slugs.insert(slug.clone()) {
                return Err(ForgeError::InvalidSchema(format!(
                    "edge label '{slug}' is empty or repeated"
                )));
            }
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self, ForgeError> {
        let s: Self = serde_json::from_str(text).map_err(|e| ForgeError::InvalidSchema(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ForgeError> {
        let text = std::fs::read_to_string(path).map_err(|e| ForgeError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    /// The relation whose label or edge label normalizes to `mention`.
    pub fn find(&self, mention: &str) -> Option<&RelationDef> {
        let key = normalize_label(mention);
        if key.is_empty() {
            return None;
        }
        self.relations
            .iter()
            .find(|r| normalize_label(&r.label) == key || normalize_label(&r.edge_label()) == key)
    }

    pub fn labels(&self) -> Vec<&str> {
        self.relations.iter().map(|r| r.label.as_str()).collect()
    }
}

/// Output of `define_schema`: the merged relations, unvalidated when
/// curation is still needed, plus warnings such as an oversized union.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaDraft {
    pub schema: RelationSchema,
    pub warnings: Vec<String>,
}

fn strip_markup(line: &str) -> String {
    let mut s = line.trim();
    for prefix in ["- ", "* ", "• "] {
        if let Some(rest) = s.strip_prefix(prefix) {
            s = rest.trim_start();
        }
    }
    let digits = s.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        let rest = &s[digits..];
        if let Some(r) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            s = r.trim_start();
        }
    }
    s.replace("**", "").replace('`', "").trim().to_string()
}

fn field_value<'a>(line: &'a str, name: &str) -> Option<&'a str> {
    let lower = line.to_lowercase();
    if lower.starts_with(name) && line[name.len()..].trim_start().starts_with(':') {
        let rest = line[name.len()..].trim_start();
        return Some(rest[1..].trim());
    }
    None
}

fn clean_label(s: &str) -> String {
    s.trim()
        .trim_matches(|c| matches!(c, '"' | '\'' | ':'))
        .trim()
        .to_string()
}

fn from_json_value(v: &Json) -> Option<Vec<RelationDef>> {
    let items = v.as_array()?;
    let mut out = Vec::new();
    for it in items {
        let obj = it.as_object()?;
        let text = |k: &str| {
            obj.get(k)
                .and_then(Json::as_str)
                .map(str::trim)
                .filter(|s| !s.is_empty())
        };
        out.push(RelationDef {
            label: clean_label(text("label")?),
            definition: text("definition")?.to_string(),
            example: text("example").map(str::to_string),
            slug: None,
        });
    }
    Some(out)
}

/// Reads relations from a model reply. JSON (`{"relations": [...]}` or a
/// bare array) is tried first, then line formats such as
/// `1. Label: definition` with optional `Definition:` and `Example:` lines.
pub fn parse_relation_list(reply: &str) -> Result<Vec<RelationDef>, String> {
    if let Some(obj) = extract_json_object(reply) {
        if let Some(rels) = obj.get("relations").and_then(from_json_value) {
            if !rels.is_empty() {
                return Ok(rels);
            }
        }
    }
    if let (Some(a), Some(b)) = (reply.find('['), reply.rfind(']')) {
        if let Some(rels) = serde_json::from_str::<Json>(&reply[a..=b])
            .ok()
            .as_ref()
            .and_then(from_json_value)
        {
            if !rels.is_empty() {
                return Ok(rels);
            }
        }
    }

    let mut out: Vec<RelationDef> = Vec::new();
    for raw in reply.lines() {
        let line = strip_markup(raw);
        if line.is_empty() || line.starts_with("```") {
            continue;
        }
        if let Some(v) = field_value(&line, "label").or_else(|| field_value(&line, "relation")) {
            out.push(RelationDef::new(clean_label(v), ""));
        } else if let Some(v) = field_value(&line, "definition") {
            if let Some(last) = out.last_mut() {
                last.definition = v.to_string();
            }
        } else if let Some(v) = field_value(&line, "example") {
            if let Some(last) = out.last_mut() {
                last.example = Some(v.to_string());
            }
        } else if let Some((label, rest)) = line.split_once(':') {
            let label = clean_label(label);
            if label.is_empty() || label.split_whitespace().count() > 6 {
                continue;
            }
            let rest = rest.trim();
            let (definition, example) = match rest.to_lowercase().find("example:") {
                Some(at) => (
                    rest[..at].trim().trim_end_matches(['(', '-', ';']).trim(),
                    Some(
                        rest[at + "example:".len()..]
                            .trim()
                            .trim_end_matches(')')
                            .trim()
                            .to_string(),
                    ),
                ),
                None => (rest, None),
            };
            out.push(RelationDef {
                label,
                definition: definition.to_string(),
                example: example.filter(|e| !e.is_empty()),
                slug: None,
            });
        } else if raw.trim_start().starts_with(|c: char| c.is_ascii_digit()) && line.split_whitespace().count() <= 6 {
            out.push(RelationDef::new(clean_label(&line), ""));
        }
    }
    out.retain(|r| !normalize_label(&r.label).is_empty() && !r.definition.trim().is_empty());
    if out.is_empty() {
        Err("no relation with a label and a definition was found".into())
    } else {
        Ok(out)
    }
}

/// Runs the relation-definition prompt `runs` times, each with a different
/// sampled example document, and merges the label-normalized union in
/// first-seen order.
pub fn define_schema(
    dataset_description: &str,
    example_application: &str,
    example_docs: &[Document],
    runs: usize,
    seed: u64,
    gateway: &Gateway,
) -> Result<SchemaDraft, ForgeError> {
    if example_docs.is_empty() {
        return Err(ForgeError::NoExampleDocs);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = Vec::new();
    let mut merged: Vec<RelationDef> = Vec::new();
    let mut seen = BTreeSet::new();
    for _ in 0..runs.max(1) {
        if order.is_empty() {
            order = (0..example_docs.len()).collect();
            order.shuffle(&mut rng);
            order.reverse();
        }
        let doc = &example_docs[order.pop().expect("refilled above")];
        let prompt = render_template(
            "relation_definition",
            &[
                ("dataset_description", dataset_description),
                ("example_application", example_application),
                ("example_document", &doc.text),
            ],
        )?;
        let req = gateway.request("relation_definition", FORGE_SYSTEM_PROMPT, &prompt);
        for r in gateway.complete_parsed(&req, parse_relation_list)? {
            if seen.insert(normalize_label(&r.label)) {
                merged.push(r);
            }
        }
    }
    let mut warnings = Vec::new();
    if merged.len() > MAX_RELATIONS {
        warnings.push(format!(
            "too many relations: {} after merging (limit {MAX_RELATIONS}); curate the schema file",
            merged.len()
        ));
    }
    Ok(SchemaDraft {
        schema: RelationSchema { relations: merged },
        warnings,
    })
}
