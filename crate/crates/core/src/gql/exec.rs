use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::ast::*;
use super::{column_name, DuplicatePolicy, ExecOptions, QueryError, QueryResult, QueryStats, ResultValue};
use crate::graph::{slugify, EdgeRecord, GraphError, KnowledgeGraph, Mutation, NodeRecord, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Bound {
    Node(String),
    Edge(String),
}

type Binding = HashMap<String, Bound>;

enum Step<'q> {
    Node(&'q NodePattern),
    Rel {
        rel: &'q RelPattern,
        from: &'q str,
        to: &'q NodePattern,
    },
}

pub(super) fn run(
    stmt: &Statement,
    graph: &KnowledgeGraph,
    options: ExecOptions,
) -> Result<(QueryResult, Vec<Mutation>), QueryError> {
    let mut rows = match stmt {
        Statement::Match(m) => {
            let steps = steps(&m.patterns);
            let mut out = Vec::new();
            let mut binding = Binding::new();
            let mut used = Vec::new();
            enumerate(graph, &steps, 0, &mut binding, &mut used, &mut out);
            if let Some(f) = &m.filter {
                let mut kept = Vec::with_capacity(out.len());
                // Every row is evaluated so a type error surfaces regardless
                // of which rows happen to precede it.
                let mut verdicts = Vec::with_capacity(out.len());
                for b in &out {
                    verdicts.push(eval(graph, f, b)?);
                }
                for (b, v) in out.into_iter().zip(verdicts) {
                    if v == Some(true) {
                        kept.push(b);
                    }
                }
                kept
            } else {
                out
            }
        }
        Statement::Create(_) => vec![Binding::new()],
    };

    let mut view = View {
        graph,
        nodes: BTreeMap::new(),
        edges: BTreeMap::new(),
        batch: Vec::new(),
    };
    if let Some(create) = stmt.create_clause() {
        for b in &mut rows {
            view.create(create, b, options.duplicates)?;
        }
    }

    let mut result = QueryResult {
        stats: QueryStats {
            nodes_created: view.nodes.len(),
            edges_created: view.edges.len(),
            rows_returned: 0,
        },
        ..QueryResult::default()
    };
    if let Some(ret) = stmt.return_clause() {
        result.columns = ret.items.iter().map(column_name).collect();
        let aliases: HashMap<&str, usize> = ret
            .items
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.alias.as_deref().map(|a| (a, i)))
            .collect();
        let mut projected: Vec<(Vec<ResultValue>, Vec<ResultValue>)> = rows
            .iter()
            .map(|b| {
                let row: Vec<ResultValue> = ret.items.iter().map(|p| view.project(&p.expr, b)).collect();
                let keys = ret
                    .order_by
                    .iter()
                    .map(|k| match &k.expr {
                        ProjExpr::Var { name } if aliases.contains_key(name.as_str()) => {
                            row[aliases[name.as_str()]].clone()
                        }
                        e => view.project(e, b),
                    })
                    .collect();
                (keys, row)
            })
            .collect();
        if !ret.order_by.is_empty() {
            projected.sort_by(|(ka, ra), (kb, rb)| {
                for ((a, b), key) in ka.iter().zip(kb).zip(&ret.order_by) {
                    let o = if key.descending { b.cmp(a) } else { a.cmp(b) };
                    if o.is_ne() {
                        return o;
                    }
                }
                ra.cmp(rb)
            });
        }
        let mut out: Vec<Vec<ResultValue>> = projected.into_iter().map(|(_, r)| r).collect();
        if let Some(n) = ret.limit {
            out.truncate(usize::try_from(n).unwrap_or(usize::MAX));
        }
        result.stats.rows_returned = out.len();
        result.rows = out;
    }
    Ok((result, view.batch))
}

fn steps(patterns: &[PathPattern]) -> Vec<Step<'_>> {
    let mut out = Vec::new();
    for p in patterns {
        out.push(Step::Node(&p.start));
        let mut prev = p.start.var.as_str();
        for h in &p.hops {
            out.push(Step::Rel {
                rel: &h.rel,
                from: prev,
                to: &h.node,
            });
            prev = &h.node.var;
        }
    }
    out
}

fn props_match(have: &BTreeMap<String, Value>, want: &[(String, Value)]) -> bool {
    want.iter().all(|(k, v)| {
        have.get(k)
            .is_some_and(|x| x.compare(v) == Some(std::cmp::Ordering::Equal))
    })
}

fn node_matches(n: &NodeRecord, p: &NodePattern) -> bool {
    p.labels.iter().all(|l| n.has_label(l)) && props_match(&n.props, &p.props)
}

fn rel_matches(e: &EdgeRecord, p: &RelPattern) -> bool {
    p.rel_type.as_ref().is_none_or(|t| *t == e.label) && props_match(&e.props, &p.props)
}

/// Depth-first over pattern elements in textual order with ascending ids,
/// so rows come out in lexicographic binding order.
fn enumerate<'g>(
    graph: &'g KnowledgeGraph,
    steps: &[Step<'_>],
    i: usize,
    binding: &mut Binding,
    used: &mut Vec<&'g str>,
    out: &mut Vec<Binding>,
) {
    let Some(step) = steps.get(i) else {
        out.push(binding.clone());
        return;
    };
    match step {
        Step::Node(p) => {
            if let Some(Bound::Node(id)) = binding.get(&p.var) {
                if graph.node(id).is_some_and(|n| node_matches(n, p)) {
                    enumerate(graph, steps, i + 1, binding, used, out);
                }
                return;
            }
            let candidates: Box<dyn Iterator<Item = &NodeRecord>> = match p.labels.first() {
                Some(l) => Box::new(graph.nodes_with_label(l)),
                None => Box::new(graph.nodes()),
            };
            for n in candidates.filter(|n| node_matches(n, p)) {
                binding.insert(p.var.clone(), Bound::Node(n.id.clone()));
                enumerate(graph, steps, i + 1, binding, used, out);
            }
            binding.remove(&p.var);
        }
        Step::Rel { rel, from, to } => {
            let Some(Bound::Node(from_id)) = binding.get(*from).cloned() else {
                return;
            };
            let edges: Box<dyn Iterator<Item = &EdgeRecord>> = match rel.direction {
                RelDirection::Outgoing => Box::new(graph.out_edges(&from_id)),
                RelDirection::Incoming => Box::new(graph.in_edges(&from_id)),
            };
            let to_bound = match binding.get(&to.var) {
                Some(Bound::Node(id)) => Some(id.clone()),
                _ => None,
            };
            for e in edges {
                if used.contains(&e.id.as_str()) || !rel_matches(e, rel) {
                    continue;
                }
                let end = match rel.direction {
                    RelDirection::Outgoing => &e.dst,
                    RelDirection::Incoming => &e.src,
                };
                let Some(end_node) = graph.node(end) else {
                    continue;
                };
                if !node_matches(end_node, to) {
                    continue;
                }
                if let Some(id) = &to_bound {
                    if id != end {
                        continue;
                    }
                }
                used.push(&e.id);
                binding.insert(rel.var.clone(), Bound::Edge(e.id.clone()));
                if to_bound.is_none() {
                    binding.insert(to.var.clone(), Bound::Node(end.clone()));
                }
                enumerate(graph, steps, i + 1, binding, used, out);
                used.pop();
            }
            binding.remove(&rel.var);
            if to_bound.is_none() {
                binding.remove(&to.var);
            }
        }
    }
}

fn lookup<'g>(graph: &'g KnowledgeGraph, b: &Binding, var: &str, key: &str) -> Option<&'g Value> {
    match b.get(var)? {
        Bound::Node(id) => graph.node(id)?.props.get(key),
        Bound::Edge(id) => graph.edge(id)?.props.get(key),
    }
}

fn operand<'a>(graph: &'a KnowledgeGraph, b: &Binding, o: &'a Operand) -> Option<&'a Value> {
    match o {
        Operand::Property { var, key } => lookup(graph, b, var, key),
        Operand::Literal { value } => Some(value),
    }
}

/// Three-valued evaluation: `None` is unknown (a missing property).
fn eval(graph: &KnowledgeGraph, e: &Expr, b: &Binding) -> Result<Option<bool>, QueryError> {
    match e {
        Expr::Compare { left, op, right } => {
            let (Some(l), Some(r)) = (operand(graph, b, left), operand(graph, b, right)) else {
                return Ok(None);
            };
            let ord = l.compare(r).ok_or_else(|| QueryError::TypeMismatch {
                left: l.kind().name().to_string(),
                right: r.kind().name().to_string(),
                op: op.symbol().to_string(),
            })?;
            Ok(Some(match op {
                CmpOp::Eq => ord.is_eq(),
                CmpOp::Ne => ord.is_ne(),
                CmpOp::Lt => ord.is_lt(),
                CmpOp::Gt => ord.is_gt(),
                CmpOp::Le => ord.is_le(),
                CmpOp::Ge => ord.is_ge(),
            }))
        }
        Expr::Not { inner } => Ok(eval(graph, inner, b)?.map(|v| !v)),
        Expr::And { terms } => {
            let vals = terms.iter().map(|t| eval(graph, t, b)).collect::<Result<Vec<_>, _>>()?;
            Ok(if vals.contains(&Some(false)) {
                Some(false)
            } else if vals.contains(&None) {
                None
            } else {
                Some(true)
            })
        }
        Expr::Or { terms } => {
            let vals = terms.iter().map(|t| eval(graph, t, b)).collect::<Result<Vec<_>, _>>()?;
            Ok(if vals.contains(&Some(true)) {
                Some(true)
            } else if vals.contains(&None) {
                None
            } else {
                Some(false)
            })
        }
    }
}

/// The graph plus records created so far by this query.
struct View<'g> {
    graph: &'g KnowledgeGraph,
    nodes: BTreeMap<String, NodeRecord>,
    edges: BTreeMap<String, EdgeRecord>,
    batch: Vec<Mutation>,
}

impl View<'_> {
    fn node(&self, id: &str) -> Option<&NodeRecord> {
        self.nodes.get(id).or_else(|| self.graph.node(id))
    }

    fn edge(&self, id: &str) -> Option<&EdgeRecord> {
        self.edges.get(id).or_else(|| self.graph.edge(id))
    }

    fn project(&self, p: &ProjExpr, b: &Binding) -> ResultValue {
        let cell = match p {
            ProjExpr::Var { name } => match b.get(name) {
                Some(Bound::Node(id)) => self.node(id).cloned().map(ResultValue::Node),
                Some(Bound::Edge(id)) => self.edge(id).cloned().map(ResultValue::Edge),
                None => None,
            },
            ProjExpr::Property { var, key } => {
                let props = match b.get(var) {
                    Some(Bound::Node(id)) => self.node(id).map(|n| &n.props),
                    Some(Bound::Edge(id)) => self.edge(id).map(|e| &e.props),
                    None => None,
                };
                props.and_then(|p| p.get(key)).cloned().map(ResultValue::Scalar)
            }
        };
        cell.unwrap_or(ResultValue::Null)
    }

    fn node_taken(&self, id: &str) -> bool {
        self.nodes.contains_key(id) || self.graph.contains_node(id)
    }

    fn create(&mut self, patterns: &[PathPattern], b: &mut Binding, policy: DuplicatePolicy) -> Result<(), QueryError> {
        for path in patterns {
            let mut prev = self.create_node(&path.start, b, policy)?;
            for hop in &path.hops {
                let next = self.create_node(&hop.node, b, policy)?;
                let (src, dst) = match hop.rel.direction {
                    RelDirection::Outgoing => (prev.clone(), next.clone()),
                    RelDirection::Incoming => (next.clone(), prev.clone()),
                };
                let label = hop.rel.rel_type.clone().expect("parser requires a type in CREATE");
                let edge_id = self.create_edge(&hop.rel, src, label, dst, policy);
                b.insert(hop.rel.var.clone(), Bound::Edge(edge_id));
                prev = next;
            }
        }
        Ok(())
    }

    fn create_node(&mut self, p: &NodePattern, b: &mut Binding, policy: DuplicatePolicy) -> Result<String, QueryError> {
        if let Some(Bound::Node(id)) = b.get(&p.var) {
            return Ok(id.clone());
        }
        let props: BTreeMap<String, Value> = p.props.iter().cloned().collect();
        let derived = props
            .get("id")
            .and_then(Value::as_str)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .or_else(|| {
                props
                    .get("name")
                    .and_then(Value::as_str)
                    .map(slugify)
                    .filter(|s| !s.is_empty())
            });
        let id = match derived {
            Some(id) if self.node_taken(&id) => match policy {
                DuplicatePolicy::Skip => {
                    b.insert(p.var.clone(), Bound::Node(id.clone()));
                    return Ok(id);
                }
                DuplicatePolicy::Error => return Err(GraphError::DuplicateId(id).into()),
            },
            Some(id) => id,
            None => (1..)
                .map(|k| format!("{}_{k}", p.var))
                .find(|c| !self.node_taken(c))
                .expect("unbounded search"),
        };
        let record = NodeRecord {
            id: id.clone(),
            labels: p.labels.clone(),
            props,
        };
        self.batch.push(Mutation::CreateNode(record.clone()));
        self.nodes.insert(id.clone(), record);
        b.insert(p.var.clone(), Bound::Node(id.clone()));
        Ok(id)
    }

    fn create_edge(
        &mut self,
        p: &RelPattern,
        src: String,
        label: String,
        dst: String,
        policy: DuplicatePolicy,
    ) -> String {
        if policy == DuplicatePolicy::Skip {
            let existing = self
                .graph
                .out_edges(&src)
                .chain(self.edges.values().filter(|e| e.src == src))
                .find(|e| e.label == label && e.dst == dst);
            if let Some(e) = existing {
                return e.id.clone();
            }
        }
        let taken: BTreeSet<String> = self.edges.keys().cloned().collect();
        let id = self
            .graph
            .free_edge_id(&format!("{src}-{}-{dst}", slugify(&label)), &taken);
        let record = EdgeRecord {
            id: id.clone(),
            src,
            dst,
            label,
            props: p.props.iter().cloned().collect(),
        };
        self.batch.push(Mutation::CreateEdge(record.clone()));
        self.edges.insert(id.clone(), record);
        id
    }
}
