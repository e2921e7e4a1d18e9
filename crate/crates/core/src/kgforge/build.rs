//! End-to-end construction: seeds, chunked extraction, fusion, import.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fusion::entity_names;
use super::schema::normalize_label;
use super::seeds::seed_terms;
use super::{
    approx_tokens, chunk_document, extract_seed_entities, extract_triples, fuse, Budgets, CandidateTriple, Corpus,
    ForgeError, FusionReport, RelationSchema, SeedEntity, DEFAULT_FUSE_THRESHOLD, DEFAULT_MAX_ENTITIES,
};
use crate::embedding::{tokens, Embedder};
use crate::graph::{EdgeRecord, KnowledgeGraph, Mutation, NodeRecord};
use crate::llm::Gateway;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForgeConfig {
    pub max_entities: usize,
    pub budgets: Budgets,
    pub fuse_threshold: f64,
    /// Ask the model before each similarity merge.
    pub confirm_merges: bool,
    /// Relation-definition runs for `define_schema`.
    pub schema_runs: usize,
    pub seed: u64,
    pub node_label: String,
}

impl Default for ForgeConfig {
    fn default() -> Self {
        Self {
            max_entities: DEFAULT_MAX_ENTITIES,
            budgets: Budgets::default(),
            fuse_threshold: DEFAULT_FUSE_THRESHOLD,
            confirm_merges: false,
            schema_runs: 5,
            seed: 0,
            node_label: "Entity".into(),
        }
    }
}

/// Corpus and graph statistics, keyed like the usual dataset table rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    #[serde(rename = "# docs")]
    pub docs: usize,
    #[serde(rename = "avg. tokens/doc")]
    pub avg_tokens_per_doc: f64,
    #[serde(rename = "# extracted entities")]
    pub extracted_entities: usize,
    /// Seed entities that never surface in the final graph; no abstracts
    /// are generated, so this is a count only.
    #[serde(rename = "# entities w/o abstracts")]
    pub entities_without_abstracts: usize,
    #[serde(rename = "# relations")]
    pub relations: usize,
    #[serde(rename = "# triples w/o fusion")]
    pub triples_without_fusion: usize,
    #[serde(rename = "# entities w/o fusion")]
    pub entities_without_fusion: usize,
    #[serde(rename = "# triples w/ fusion")]
    pub triples_with_fusion: usize,
    #[serde(rename = "# entities w/ fusion")]
    pub entities_with_fusion: usize,
}

impl CorpusStats {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }

    /// Two-column text table.
    pub fn to_table(&self) -> String {
        let v = serde_json::to_value(self).expect("stats serialize");
        let obj = v.as_object().expect("struct");
        let width = obj.keys().map(|k| k.chars().count()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, val) in obj {
            let shown = match val.as_f64() {
                Some(f) if !val.is_u64() => format!("{f:.1}"),
                _ => val.to_string(),
            };
            out.push_str(&format!("{k:<width$}  {shown:>10}\n"));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct BuildOutput {
    pub graph: KnowledgeGraph,
    pub report: FusionReport,
    pub stats: CorpusStats,
    pub seeds: Vec<SeedEntity>,
    /// Fused triples in graph edge order.
    pub triples: Vec<CandidateTriple>,
    pub dropped_off_schema: usize,
    pub dropped_self_loops: usize,
}

fn node_slug(name: &str) -> String {
    let s = tokens(name).join("_");
    if s.is_empty() {
        "entity".into()
    } else {
        s
    }
}

/// Seeds, then per-chunk extraction (concurrent, results kept in corpus
/// order), then fusion and a single import batch.
pub fn build(
    corpus: &Corpus,
    schema: &RelationSchema,
    config: &ForgeConfig,
    gateway: &Gateway,
    embedder: &dyn Embedder<f64>,
) -> Result<BuildOutput, ForgeError> {
    schema.validate().map_err(|e| e.at("schema", None))?;
    let seeds = extract_seed_entities(corpus, config.max_entities).map_err(|e| e.at("seeds", None))?;
    let terms = seed_terms(&seeds);

    let mut jobs: Vec<(&str, String)> = Vec::new();
    for doc in &corpus.docs {
        let chunks =
            chunk_document(doc, &terms, schema, &config.budgets).map_err(|e| e.at("triples", Some(&doc.id)))?;
        jobs.extend(chunks.into_iter().map(|c| (doc.id.as_str(), c)));
    }
    let batches: Vec<_> = jobs
        .par_iter()
        .map(|(id, chunk)| {
            extract_triples(id, chunk, &terms, schema, gateway, &config.budgets).map_err(|e| e.at("triples", Some(id)))
        })
        .collect();
    let mut raw = Vec::new();
    let (mut off_schema, mut loops) = (0, 0);
    for b in batches {
        let b = b?;
        off_schema += b.dropped_off_schema;
        loops += b.dropped_self_loops;
        raw.extend(b.accepted);
    }

    let confirm = config.confirm_merges.then_some(gateway);
    let (fused, report) = fuse(&raw, embedder, config.fuse_threshold, confirm).map_err(|e| e.at("fusion", None))?;
    let graph = import(&fused, schema, &config.node_label).map_err(|e| e.at("import", None))?;

    let names: BTreeSet<String> = entity_names(&fused).into_iter().map(normalize_label).collect();
    let total_tokens: usize = corpus.docs.iter().map(|d| approx_tokens(&d.text)).sum();
    let stats = CorpusStats {
        docs: corpus.len(),
        avg_tokens_per_doc: if corpus.is_empty() {
            0.0
        } else {
            total_tokens as f64 / corpus.len() as f64
        },
        extracted_entities: seeds.len(),
        entities_without_abstracts: seeds
            .iter()
            .filter(|s| !names.contains(&normalize_label(&s.term)))
            .count(),
        relations: schema.relations.len(),
        triples_without_fusion: report.triples_before,
        entities_without_fusion: report.entities_before,
        triples_with_fusion: report.triples_after,
        entities_with_fusion: entity_names(&fused).len(),
    };
    Ok(BuildOutput {
        graph,
        report,
        stats,
        seeds,
        triples: fused,
        dropped_off_schema: off_schema,
        dropped_self_loops: loops,
    })
}

/// One node per entity name (sorted) and one edge per triple. Edges carry
/// the schema label, the source document and any confidence.
pub fn import(
    triples: &[CandidateTriple],
    schema: &RelationSchema,
    node_label: &str,
) -> Result<KnowledgeGraph, ForgeError> {
    let mut g = KnowledgeGraph::new();
    let mut taken = BTreeSet::new();
    let mut ids = std::collections::BTreeMap::new();
    let mut batch = Vec::new();
    for name in entity_names(triples) {
        let id = g.free_node_id(&node_slug(name), &taken);
        taken.insert(id.clone());
        ids.insert(name, id.clone());
        batch.push(Mutation::CreateNode(
            NodeRecord::new(id).with_label(node_label).with_prop("name", name),
        ));
    }
    for (i, t) in triples.iter().enumerate() {
        let rel = schema
            .find(&t.relation)
            .ok_or_else(|| ForgeError::Internal(format!("relation '{}' is not in the schema", t.relation)))?;
        let mut e = EdgeRecord::new(
            format!("t{}", i + 1),
            ids[t.subject.as_str()].clone(),
            rel.edge_label(),
            ids[t.object.as_str()].clone(),
        )
        .with_prop("relation", rel.label.clone())
        .with_prop("source_doc", t.source_doc.clone());
        if let Some(c) = t.confidence {
            e = e.with_prop("confidence", c);
        }
        batch.push(Mutation::CreateEdge(e));
    }
    if !batch.is_empty() {
        g.mutate(&batch)?;
    }
    Ok(g)
}
