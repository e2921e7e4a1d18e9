//! Seeded generators for small random graphs and Cypher queries.

use kgpilot_core::graph::{EdgeRecord, KnowledgeGraph, Mutation, NodeRecord};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn node_id(i: usize) -> String {
    format!("n{i:02}")
}

/// Up to `max_nodes` nodes with random labels/properties and up to
/// `max_edges` typed edges (self-loops and parallel edges allowed).
pub fn random_property_graph(r: &mut ChaCha8Rng, max_nodes: usize, max_edges: usize) -> KnowledgeGraph {
    let n = r.random_range(0..=max_nodes);
    let mut batch = Vec::new();
    for i in 0..n {
        let mut node = NodeRecord::new(node_id(i));
        for l in ["A", "B", "C"] {
            if r.random_bool(0.4) {
                node = node.with_label(l);
            }
        }
        if r.random_bool(0.7) {
            node = node.with_prop("x", r.random_range(0..5i64));
        }
        if r.random_bool(0.5) {
            node = node.with_prop("y", *["p", "q", "r"].choose(r).unwrap());
        }
        if r.random_bool(0.3) {
            node = node.with_prop("z", r.random_range(0..8) as f64 / 2.0);
        }
        batch.push(Mutation::CreateNode(node));
    }
    if n > 0 {
        let m = r.random_range(0..=max_edges);
        for j in 0..m {
            let s = r.random_range(0..n);
            let d = r.random_range(0..n);
            let mut e = EdgeRecord::new(
                format!("e{j:02}"),
                node_id(s),
                *["R", "S"].choose(r).unwrap(),
                node_id(d),
            );
            if r.random_bool(0.5) {
                e = e.with_prop("w", r.random_range(0..3i64));
            }
            batch.push(Mutation::CreateEdge(e));
        }
    }
    let mut g = KnowledgeGraph::new();
    if !batch.is_empty() {
        g.mutate(&batch).unwrap();
    }
    g
}

/// Simple directed graph over `n` nodes with edge label `label`.
pub fn random_digraph(r: &mut ChaCha8Rng, n: usize, p: f64, label: &str, dag: bool) -> KnowledgeGraph {
    let mut batch: Vec<Mutation> = (0..n)
        .map(|i| Mutation::CreateNode(NodeRecord::new(node_id(i))))
        .collect();
    for s in 0..n {
        for d in 0..n {
            if s == d || (dag && s >= d) {
                continue;
            }
            if r.random_bool(p) {
                batch.push(Mutation::CreateEdge(EdgeRecord::new(
                    format!("{}-{}", node_id(s), node_id(d)),
                    node_id(s),
                    label,
                    node_id(d),
                )));
            }
        }
    }
    let mut g = KnowledgeGraph::new();
    if !batch.is_empty() {
        g.mutate(&batch).unwrap();
    }
    g
}

struct QueryGen<'a> {
    r: &'a mut ChaCha8Rng,
    node_vars: Vec<String>,
    rel_vars: Vec<String>,
    next: usize,
}

impl QueryGen<'_> {
    fn literal_for(&mut self, key: &str) -> String {
        // Mostly kind-correct literals, occasionally a mismatched one.
        let mismatch = self.r.random_bool(0.05);
        match (key, mismatch) {
            ("x" | "w", false) => self.r.random_range(-1..5i64).to_string(),
            ("y", false) => format!("'{}'", ["p", "q", "r"].choose(self.r).unwrap()),
            ("z", false) => format!("{:?}", self.r.random_range(0..8) as f64 / 2.0),
            ("y", true) => "1".to_string(),
            _ => "'p'".to_string(),
        }
    }

    fn prop_map(&mut self, keys: &[&str]) -> String {
        if !self.r.random_bool(0.25) {
            return String::new();
        }
        let key = *keys.choose(self.r).unwrap();
        let lit = if self.r.random_bool(0.9) {
            self.literal_for(key)
        } else {
            // kind mismatch inside a pattern map is a plain non-match
            "true".to_string()
        };
        format!(" {{{key}: {lit}}}")
    }

    fn fresh(&mut self, prefix: &str) -> String {
        self.next += 1;
        format!("{prefix}{}", self.next)
    }

    fn node(&mut self) -> String {
        let choice = self.r.random_range(0..10);
        if choice < 2 && !self.node_vars.is_empty() {
            return format!("({})", self.node_vars.choose(self.r).unwrap().clone());
        }
        let var = if choice < 4 {
            String::new()
        } else {
            let v = self.fresh("n");
            self.node_vars.push(v.clone());
            v
        };
        let mut s = format!("({var}");
        if self.r.random_bool(0.4) {
            s.push(':');
            s.push_str(["A", "B", "C"].choose(self.r).unwrap());
        }
        s.push_str(&self.prop_map(&["x", "y", "z"]));
        s.push(')');
        s
    }

    fn rel(&mut self) -> String {
        let var = if self.r.random_bool(0.5) {
            let v = self.fresh("r");
            self.rel_vars.push(v.clone());
            v
        } else {
            String::new()
        };
        let ty = if self.r.random_bool(0.5) {
            format!(":{}", ["R", "S"].choose(self.r).unwrap())
        } else {
            String::new()
        };
        let props = self.prop_map(&["w"]);
        if self.r.random_bool(0.5) {
            format!("-[{var}{ty}{props}]->")
        } else {
            format!("<-[{var}{ty}{props}]-")
        }
    }

    fn prop_access(&mut self) -> (String, &'static str) {
        let use_rel = !self.rel_vars.is_empty() && self.r.random_bool(0.25);
        if use_rel {
            let v = self.rel_vars.choose(self.r).unwrap().clone();
            (v, "w")
        } else {
            let v = self.node_vars.choose(self.r).unwrap().clone();
            let key = *["x", "y", "z", "missing"].choose(self.r).unwrap();
            (v, key)
        }
    }

    fn comparison(&mut self) -> String {
        let op = *["=", "<>", "<", ">", "<=", ">="].choose(self.r).unwrap();
        let (v, key) = self.prop_access();
        let rhs = if self.r.random_bool(0.2) {
            let (v2, _) = self.prop_access();
            format!("{v2}.{key}")
        } else {
            self.literal_for(key)
        };
        if self.r.random_bool(0.15) {
            format!("{rhs} {op} {v}.{key}")
        } else {
            format!("{v}.{key} {op} {rhs}")
        }
    }

    fn expr(&mut self, depth: u32) -> String {
        if depth == 0 || self.r.random_bool(0.4) {
            return self.comparison();
        }
        match self.r.random_range(0..4) {
            0 => format!("NOT {}", self.expr(depth - 1)),
            1 => format!("({} AND {})", self.expr(depth - 1), self.expr(depth - 1)),
            2 => format!("{} OR {}", self.expr(depth - 1), self.expr(depth - 1)),
            _ => format!("{} AND {}", self.expr(depth - 1), self.expr(depth - 1)),
        }
    }

    fn proj(&mut self) -> String {
        let mut all: Vec<String> = self.node_vars.clone();
        all.extend(self.rel_vars.iter().cloned());
        let v = all.choose(self.r).unwrap().clone();
        if self.r.random_bool(0.5) {
            let key = if self.rel_vars.contains(&v) {
                "w"
            } else {
                *["x", "y", "z"].choose(self.r).unwrap()
            };
            format!("{v}.{key}")
        } else {
            v
        }
    }
}

/// A random read query over the vocabulary used by [`random_property_graph`].
pub fn random_match_query(r: &mut ChaCha8Rng) -> String {
    let mut g = QueryGen {
        r,
        node_vars: Vec::new(),
        rel_vars: Vec::new(),
        next: 0,
    };
    let mut patterns = Vec::new();
    let n_patterns = if g.r.random_bool(0.7) { 1 } else { 2 };
    for _ in 0..n_patterns {
        let mut p = g.node();
        for _ in 0..g.r.random_range(0..=2) {
            p.push_str(&g.rel());
            p.push_str(&g.node());
        }
        patterns.push(p);
    }
    if g.node_vars.is_empty() {
        // ensure at least one projectable variable
        patterns.push("(m0)".into());
        g.node_vars.push("m0".into());
    }
    let mut q = format!("MATCH {}", patterns.join(", "));
    if g.r.random_bool(0.6) {
        let e = g.expr(2);
        q.push_str(" WHERE ");
        q.push_str(&e);
    }
    let mut items: Vec<String> = Vec::new();
    for _ in 0..g.r.random_range(1..=3) {
        let p = g.proj();
        if !items.contains(&p) {
            items.push(p);
        }
    }
    q.push_str(" RETURN ");
    q.push_str(&items.join(", "));
    if g.r.random_bool(0.5) {
        let keys: Vec<String> = (0..g.r.random_range(1..=2))
            .map(|_| {
                let k = g.proj();
                if g.r.random_bool(0.5) {
                    format!("{k} DESC")
                } else {
                    k
                }
            })
            .collect();
        q.push_str(" ORDER BY ");
        q.push_str(&keys.join(", "));
    }
    if g.r.random_bool(0.3) {
        q.push_str(&format!(" LIMIT {}", g.r.random_range(0..5)));
    }
    q
}
