//! Zero-shot graph construction from a document corpus: relation schema
//! definition, seed entities, budgeted triple extraction and entity fusion.

mod build;
mod fusion;
mod schema;
mod seeds;
mod triples;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::EmbedError;
use crate::graph::GraphError;
use crate::llm::{LlmError, TemplateError};

pub use build::{build, import, BuildOutput, CorpusStats, ForgeConfig};
pub use fusion::{entity_names, fuse, fusion_text, FusionReport, Merge, DEFAULT_FUSE_THRESHOLD};
pub use schema::{
    define_schema, normalize_label, parse_relation_list, RelationDef, RelationSchema, SchemaDraft,
    JAPANESE_MEDICAL_SCHEMA, MAX_RELATIONS, UK_LEGISLATION_SCHEMA,
};
pub use seeds::{
    extract_seed_entities, is_stop_word, seed_terms, SeedEntity, SeedExtractor, TfIdfSeeds, DEFAULT_MAX_ENTITIES,
};
pub use triples::{
    approx_tokens, chunk_document, extract_triples, words_within, Budgets, CandidateTriple, TripleBatch,
};

/// System turn for every construction prompt.
pub const FORGE_SYSTEM_PROMPT: &str =
    "You build knowledge graphs from domain documents and follow the requested output format exactly.";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ForgeError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("at least one example document is required")]
    NoExampleDocs,
    #[error("chunk is empty")]
    EmptyChunk,
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("prompt overhead of {overhead} tokens leaves no room within the {budget}-token input budget")]
    BudgetTooSmall { overhead: usize, budget: usize },
    #[error("internal error: {0}")]
    Internal(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("stage {stage}{}: {source}", doc_id.as_ref().map(|d| format!(" (doc {d})")).unwrap_or_default())]
    Stage {
        stage: String,
        doc_id: Option<String>,
        source: Box<ForgeError>,
    },
}

impl ForgeError {
    pub(crate) fn at(self, stage: &str, doc_id: Option<&str>) -> Self {
        ForgeError::Stage {
            stage: stage.to_string(),
            doc_id: doc_id.map(str::to_string),
            source: Box::new(self),
        }
    }

    /// The innermost error, past any stage wrappers.
    pub fn root(&self) -> &ForgeError {
        match self {
            ForgeError::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
        }
    }
}

/// Documents in id order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub docs: Vec<Document>,
}

impl Corpus {
    pub fn new(mut docs: Vec<Document>) -> Self {
        docs.sort_by(|a, b| a.id.cmp(&b.id));
        Self { docs }
    }

    /// Every `.txt` file in `dir`; the file stem becomes the document id.
    pub fn load_dir(dir: &Path) -> Result<Self, ForgeError> {
        let io = |e: std::io::Error| ForgeError::Io(format!("{}: {e}", dir.display()));
        let mut docs = Vec::new();
        for entry in std::fs::read_dir(dir).map_err(io)? {
            let path = entry.map_err(io)?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("txt") || !path.is_file() {
                continue;
            }
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| ForgeError::Io(format!("non-UTF-8 file name {}", path.display())))?
                .to_string();
            let text =
                std::fs::read_to_string(&path).map_err(|e| ForgeError::Io(format!("{}: {e}", path.display())))?;
            docs.push(Document { id, text });
        }
        Ok(Self::new(docs))
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.docs.iter().find(|d| d.id == id)
    }
}
