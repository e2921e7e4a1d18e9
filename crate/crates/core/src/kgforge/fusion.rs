//! Entity fusion: single-link clustering of entity names by embedding
//! similarity, with an optional model check before each merge.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::schema::normalize_label;
use super::seeds::is_stop_word;
use super::{CandidateTriple, ForgeError, FORGE_SYSTEM_PROMPT};
use crate::embedding::{cosine, tokens, EmbedError, Embedder, EmbeddingVector};
use crate::llm::{render_template, FieldKind, FieldSpec, Gateway};
use crate::scalar::Scalar;

pub const DEFAULT_FUSE_THRESHOLD: f64 = 0.85;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub canonical: String,
    /// Names folded into `canonical`, sorted.
    pub aliases: Vec<String>,
    /// Cosine of each alias against the canonical name.
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FusionReport {
    pub merges: Vec<Merge>,
    pub triples_before: usize,
    pub triples_after: usize,
    pub entities_before: usize,
    pub entities_after: usize,
    /// Triples that became self loops once both ends were merged.
    pub self_loops_dropped: usize,
    /// Candidate merges the confirming model declined.
    pub merges_declined: usize,
}

impl FusionReport {
    /// Alias to canonical name, for every merged-away alias.
    pub fn alias_map(&self) -> BTreeMap<&str, &str> {
        self.merges
            .iter()
            .flat_map(|m| m.aliases.iter().map(move |a| (a.as_str(), m.canonical.as_str())))
            .collect()
    }
}

/// Entity names are embedded without stop words, so word-order variants
/// such as "duty on biodiesel" and "biodiesel duty" share a bag of tokens.
pub fn fusion_text(name: &str) -> String {
    let kept: Vec<String> = tokens(name).into_iter().filter(|t| !is_stop_word(t)).collect();
    if kept.is_empty() {
        name.to_string()
    } else {
        kept.join(" ")
    }
}

struct Sets(Vec<usize>);

impl Sets {
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut c = i;
        while self.0[c] != r {
            let next = self.0[c];
            self.0[c] = r;
            c = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.0[hi] = lo;
        }
    }
}

fn embed_opt<T: Scalar>(embedder: &dyn Embedder<T>, text: &str) -> Result<Option<EmbeddingVector<T>>, ForgeError> {
    match embedder.embed(&fusion_text(text)) {
        Ok(v) => Ok(Some(v)),
        Err(EmbedError::EmptyText) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn similarity<T: Scalar>(a: &EmbeddingVector<T>, b: &EmbeddingVector<T>) -> Result<Option<T>, ForgeError> {
    match cosine(a, b) {
        Ok(c) => Ok(Some(c)),
        Err(EmbedError::ZeroVector) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn confirmed(gateway: &Gateway, a: &str, b: &str, score: f64) -> Result<bool, ForgeError> {
    let prompt = render_template(
        "fusion_confirm",
        &[("entity_a", a), ("entity_b", b), ("similarity", &format!("{score:.4}"))],
    )?;
    let req = gateway.request("fusion_confirm", FORGE_SYSTEM_PROMPT, &prompt);
    let spec = FieldSpec::new().required("same", FieldKind::Bool);
    let reply = gateway.complete_structured(&req, &spec)?;
    Ok(match &reply.value["same"] {
        serde_json::Value::Bool(b) => *b,
        other => matches!(other.as_str(), Some("true" | "yes")),
    })
}

/// Clusters entity names whose embeddings reach `threshold` (single link),
/// renames each cluster to its most frequent name (ties: smallest string),
/// then drops self loops and exact duplicate triples, keeping first
/// occurrences in input order.
pub fn fuse<T: Scalar>(
    triples: &[CandidateTriple],
    embedder: &dyn Embedder<T>,
    threshold: T,
    confirm: Option<&Gateway>,
) -> Result<(Vec<CandidateTriple>, FusionReport), ForgeError> {
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for t in triples {
        *freq.entry(t.subject.as_str()).or_insert(0) += 1;
        *freq.entry(t.object.as_str()).or_insert(0) += 1;
    }
    let names: Vec<&str> = freq.keys().copied().collect();
    let vectors = names
        .iter()
        .map(|n| embed_opt(embedder, n))
        .collect::<Result<Vec<_>, _>>()?;

    let mut sets = Sets((0..names.len()).collect());
    let mut declined = 0;
    for i in 0..names.len() {
        let Some(vi) = &vectors[i] else { continue };
        for j in i + 1..names.len() {
            let Some(vj) = &vectors[j] else { continue };
            if sets.find(i) == sets.find(j) {
                continue;
            }
            let Some(score) = similarity(vi, vj)? else { continue };
            if score < threshold {
                continue;
            }
            if let Some(g) = confirm {
                if !confirmed(g, names[i], names[j], score.to_f64_lossy())? {
                    declined += 1;
                    continue;
                }
            }
            sets.union(i, j);
        }
    }

    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..names.len() {
        clusters.entry(sets.find(i)).or_default().push(i);
    }
    let mut rename: BTreeMap<&str, &str> = BTreeMap::new();
    let mut merges = Vec::new();
    for members in clusters.values() {
        // Names are sorted, so the first maximum is the smallest string.
        let canon = *members
            .iter()
            .max_by(|&&a, &&b| freq[names[a]].cmp(&freq[names[b]]).then(b.cmp(&a)))
            .expect("clusters are non-empty");
        for &m in members {
            rename.insert(names[m], names[canon]);
        }
        if members.len() > 1 {
            let mut aliases = Vec::new();
            let mut scores = Vec::new();
            for &m in members.iter().filter(|&&m| m != canon) {
                aliases.push(names[m].to_string());
                let s = match (&vectors[m], &vectors[canon]) {
                    (Some(a), Some(b)) => similarity(a, b)?.map_or(0.0, Scalar::to_f64_lossy),
                    _ => 0.0,
                };
                scores.push(s);
            }
            merges.push(Merge {
                canonical: names[canon].to_string(),
                aliases,
                scores,
            });
        }
    }
    merges.sort_by(|a, b| a.canonical.cmp(&b.canonical));

    let mut seen: HashSet<(String, String, String)> = HashSet::new();
    let mut out = Vec::new();
    let mut self_loops = 0;
    for t in triples {
        let subject = rename[t.subject.as_str()].to_string();
        let object = rename[t.object.as_str()].to_string();
        if normalize_label(&subject) == normalize_label(&object) {
            self_loops += 1;
            continue;
        }
        if seen.insert((subject.clone(), t.relation.clone(), object.clone())) {
            out.push(CandidateTriple {
                subject,
                object,
                ..t.clone()
            });
        }
    }
    let report = FusionReport {
        triples_before: triples.len(),
        triples_after: out.len(),
        entities_before: names.len(),
        entities_after: clusters.len(),
        self_loops_dropped: self_loops,
        merges_declined: declined,
        merges,
    };
    Ok((out, report))
}

/// Distinct subject and object names, sorted.
pub fn entity_names(triples: &[CandidateTriple]) -> BTreeSet<&str> {
    triples
        .iter()
        .flat_map(|t| [t.subject.as_str(), t.object.as_str()])
        .collect()
}
