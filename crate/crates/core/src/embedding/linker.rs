use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use super::{cosine, EmbedError, Embedder, EmbeddingVector};
use crate::graph::{slugify, KnowledgeGraph};
use crate::scalar::Scalar;

pub const DEFAULT_THRESHOLD: f64 = 0.80;
pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkResult<T> {
    pub mention: String,
    pub node_id: Option<String>,
    /// Best candidate score; zero when there are no candidates.
    pub score: T,
    pub candidates: Vec<(String, T)>,
}

struct Cache<T: Scalar> {
    /// (lineage, version) of the graph the entries were computed against.
    stamp: Option<(u64, u64)>,
    vectors: HashMap<String, Option<EmbeddingVector<T>>>,
}

/// Resolves mentions to graph nodes: exact name match first, then cosine
/// similarity over node-name embeddings.
pub struct EntityLinker<T: Scalar> {
    embedder: Arc<dyn Embedder<T>>,
    fingerprint: String,
    pub k: usize,
    pub threshold: T,
    cache: RwLock<Cache<T>>,
}

impl<T: Scalar> EntityLinker<T> {
    pub fn new(embedder: Arc<dyn Embedder<T>>) -> Self {
        Self {
            fingerprint: embedder.fingerprint(),
            embedder,
            k: DEFAULT_K,
            threshold: T::lit(DEFAULT_THRESHOLD),
            cache: RwLock::new(Cache {
                stamp: None,
                vectors: HashMap::new(),
            }),
        }
    }

    pub fn with_params(mut self, k: usize, threshold: T) -> Self {
        self.k = k.max(1);
        self.threshold = threshold;
        self
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn cached_vectors(&self) -> usize {
        self.cache.read().vectors.len()
    }

    fn vector(&self, text: &str) -> Option<EmbeddingVector<T>> {
        if let Some(v) = self.cache.read().vectors.get(text) {
            return v.clone();
        }
        let v = self.embedder.embed(text).ok();
        self.cache.write().vectors.insert(text.to_string(), v.clone());
        v
    }

    fn sync(&self, graph: &KnowledgeGraph) {
        let stamp = Some((graph.lineage(), graph.version()));
        if self.cache.read().stamp == stamp {
            return;
        }
        let mut cache = self.cache.write();
        if cache.stamp != stamp {
            cache.stamp = stamp;
            cache.vectors.clear();
        }
    }

    /// Links `mention` against the display names of every node in `graph`.
    pub fn link(&self, mention: &str, graph: &KnowledgeGraph) -> Result<LinkResult<T>, EmbedError> {
        self.sync(graph);
        let items: Vec<(&str, &str)> = graph.nodes().map(|n| (n.id.as_str(), n.display_name())).collect();
        self.rank(mention, &items)
    }

    /// Links a relation mention against a list of relation type names.
    pub fn link_label(&self, mention: &str, labels: &[String]) -> Result<LinkResult<T>, EmbedError> {
        let items: Vec<(&str, &str)> = labels.iter().map(|l| (l.as_str(), l.as_str())).collect();
        self.rank(mention, &items)
    }

    fn rank(&self, mention: &str, items: &[(&str, &str)]) -> Result<LinkResult<T>, EmbedError> {
        let key = slugify(mention);
        if key.is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let exact = items
            .iter()
            .filter(|(_, name)| slugify(name) == key)
            .map(|(id, _)| *id)
            .min();
        let m = self.vector(mention);
        let mut candidates: Vec<(String, T)> = items
            .iter()
            .filter_map(|(id, name)| {
                if Some(*id) == exact {
                    return Some((id.to_string(), T::one()));
                }
                let s = cosine(m.as_ref()?, self.vector(name).as_ref()?).ok()?;
                Some((id.to_string(), s))
            })
            .collect();
        candidates.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.0.cmp(&b.0))
        });
        candidates.truncate(self.k);
        let score = if exact.is_some() {
            T::one()
        } else {
            candidates.first().map_or(T::zero(), |c| c.1)
        };
        let node_id = match exact {
            Some(id) => Some(id.to_string()),
            None => candidates
                .first()
                .filter(|c| c.1 >= self.threshold)
                .map(|c| c.0.clone()),
        };
        Ok(LinkResult {
            mention: mention.to_string(),
            node_id,
            score,
            candidates,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::HashEmbedder;
    use crate::graph::{Mutation, NodeRecord};

    fn graph(names: &[&str]) -> KnowledgeGraph {
        let mut g = KnowledgeGraph::new();
        let batch: Vec<Mutation> = names
            .iter()
            .map(|n| Mutation::CreateNode(NodeRecord::new(slugify(n)).with_prop("name", *n)))
            .collect();
        g.mutate(&batch).unwrap();
        g
    }

    fn linker() -> EntityLinker<f64> {
        EntityLinker::new(Arc::new(HashEmbedder::default()))
    }

    #[test]
    fn exact_match_wins() {
        let g = graph(&["BERT", "RoBERTa"]);
        let r = linker().link("bert", &g).unwrap();
        assert_eq!(r.node_id.as_deref(), Some("bert"));
        assert_eq!(r.score, 1.0);
        assert_eq!(r.candidates[0], ("bert".to_string(), 1.0));
    }

    #[test]
    fn empty_graph_and_empty_mention() {
        let l = linker();
        let r = l.link("BERT", &KnowledgeGraph::new()).unwrap();
        assert!(r.node_id.is_none());
        assert!(r.candidates.is_empty());
        assert_eq!(l.link("  ", &KnowledgeGraph::new()), Err(EmbedError::EmptyText));
    }

    #[test]
    fn cache_invalidates_on_version_change() {
        let mut g = graph(&["BERT"]);
        let l = linker();
        l.link("transformer", &g).unwrap();
        assert_eq!(l.cached_vectors(), 2);
        g.mutate(&[Mutation::CreateNode(NodeRecord::new("gpt").with_prop("name", "GPT"))])
            .unwrap();
        l.link("transformer", &g).unwrap();
        assert_eq!(l.cached_vectors(), 3);
    }

    #[test]
    fn relation_labels() {
        let l = linker();
        let labels = vec!["Prerequisite_of".to_string(), "Used_for".to_string()];
        let r = l.link_label("used for", &labels).unwrap();
        assert_eq!(r.node_id.as_deref(), Some("Used_for"));
        assert_eq!(r.score, 1.0);
        assert_eq!(r.candidates.len(), 2);
    }
}
