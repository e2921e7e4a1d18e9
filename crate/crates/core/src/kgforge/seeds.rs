//! Seed entities: candidate names ranked by corpus-level TF-IDF mass.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Corpus, ForgeError};
use crate::embedding::tokens;

pub const DEFAULT_MAX_ENTITIES: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedEntity {
    pub term: String,
    pub score: f64,
}

/// Swappable seed ranking, e.g. for a topic-model extractor.
pub trait SeedExtractor: Send + Sync {
    fn extract(&self, corpus: &Corpus, max_entities: usize) -> Result<Vec<SeedEntity>, ForgeError>;
}

/// Word n-grams (1 to `max_n` tokens) that neither start nor end with a stop
/// word, scored by `sum_d tf(t, d) * (ln((1 + N) / (1 + df(t))) + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TfIdfSeeds {
    pub max_n: usize,
}

impl Default for TfIdfSeeds {
    fn default() -> Self {
        Self { max_n: 3 }
    }
}

const STOP_WORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any", "are", "as", "at",
    "be", "because", "been", "before", "being", "below", "between", "both", "but", "by", "can", "could", "did", "do",
    "does", "doing", "down", "during", "each", "either", "etc", "every", "few", "for", "from", "further", "had", "has",
    "have", "having", "he", "her", "here", "hers", "him", "his", "how", "however", "i", "if", "in", "into", "is", "it",
    "its", "itself", "just", "may", "me", "might", "more", "most", "must", "my", "no", "nor", "not", "now", "of",
    "off", "on", "once", "only", "or", "other", "our", "ours", "out", "over", "own", "per", "same", "shall", "she",
    "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them", "then", "there", "these", "they",
    "this", "those", "through", "thus", "to", "too", "under", "until", "up", "upon", "us", "very", "was", "we", "were",
    "what", "when", "where", "whether", "which", "while", "who", "whom", "why", "will", "with", "within", "without",
    "would", "you", "your", "yours",
];

pub fn is_stop_word(token: &str) -> bool {
    STOP_WORDS.binary_search(&token).is_ok()
}

fn usable(token: &str) -> bool {
    let single_ascii = token.len() == 1 && token.is_ascii();
    !single_ascii && !token.chars().all(|c| c.is_ascii_digit()) && !is_stop_word(token)
}

impl TfIdfSeeds {
    /// Term frequencies of the candidate n-grams of one document. N-grams
    /// never cross clause punctuation or line breaks.
    pub fn term_counts(&self, text: &str) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for clause in text.split(['.', ',', ';', ':', '!', '?', '(', ')', '[', ']', '"', '\n', '。', '、']) {
            self.count_clause(&tokens(clause), &mut counts);
        }
        counts
    }

    fn count_clause(&self, toks: &[String], counts: &mut BTreeMap<String, usize>) {
        for start in 0..toks.len() {
            if !usable(&toks[start]) {
                continue;
            }
            for n in 1..=self.max_n.min(toks.len() - start) {
                let window = &toks[start..start + n];
                // Interior tokens may be stop words ("duty of excise"), but
                // not digits-only or single letters.
                if !usable(&window[n - 1]) {
                    continue;
                }
                if window.iter().any(|t| t.chars().all(|c| c.is_ascii_digit())) {
                    continue;
                }
                *counts.entry(window.join(" ")).or_insert(0) += 1;
            }
        }
    }
}

impl SeedExtractor for TfIdfSeeds {
    fn extract(&self, corpus: &Corpus, max_entities: usize) -> Result<Vec<SeedEntity>, ForgeError> {
        if corpus.is_empty() {
            return Err(ForgeError::EmptyCorpus);
        }
        let per_doc: Vec<BTreeMap<String, usize>> = corpus.docs.iter().map(|d| self.term_counts(&d.text)).collect();
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for counts in &per_doc {
            for t in counts.keys() {
                *df.entry(t.as_str()).or_insert(0) += 1;
            }
        }
        let n = corpus.len() as f64;
        let mut mass: BTreeMap<&str, f64> = BTreeMap::new();
        for counts in &per_doc {
            for (t, &tf) in counts {
                let idf = ((1.0 + n) / (1.0 + df[t.as_str()] as f64)).ln() + 1.0;
                *mass.entry(t.as_str()).or_insert(0.0) += tf as f64 * idf;
            }
        }
        let mut ranked: Vec<SeedEntity> = mass
            .into_iter()
            .map(|(t, score)| SeedEntity {
                term: t.to_string(),
                score,
            })
            .collect();
        ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.term.cmp(&b.term)));
        ranked.truncate(max_entities);
        Ok(ranked)
    }
}

/// Ranked seed entities from the default TF-IDF extractor.
pub fn extract_seed_entities(corpus: &Corpus, max_entities: usize) -> Result<Vec<SeedEntity>, ForgeError> {
    TfIdfSeeds::default().extract(corpus, max_entities)
}

/// Distinct terms, for callers that only need the names.
pub fn seed_terms(seeds: &[SeedEntity]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    seeds
        .iter()
        .filter(|s| seen.insert(s.term.as_str()))
        .map(|s| s.term.clone())
        .collect()
}
