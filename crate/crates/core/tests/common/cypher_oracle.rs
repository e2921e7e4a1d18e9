//! Brute-force reference semantics: enumerate the full cartesian product of
//! variable assignments, keep consistent ones, then filter and project.

use std::cmp::Ordering;
use std::collections::HashMap;

use kgpilot_core::gql::{CmpOp, Expr, GraphQuery, Operand, ProjExpr, RelDirection, ResultValue, Statement};
use kgpilot_core::graph::{KnowledgeGraph, Value};

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Node,
    Rel,
}

enum Check {
    Node {
        var: usize,
        labels: Vec<String>,
        props: Vec<(String, Value)>,
    },
    Rel {
        var: usize,
        from: usize,
        to: usize,
        outgoing: bool,
        ty: Option<String>,
        props: Vec<(String, Value)>,
    },
}

#[derive(Debug, PartialEq)]
pub enum OracleError {
    TypeMismatch,
}

pub fn run(q: &GraphQuery, g: &KnowledgeGraph) -> Result<Vec<Vec<ResultValue>>, OracleError> {
    let Statement::Match(m) = &q.ast else {
        panic!("oracle handles MATCH only");
    };
    let mut vars: Vec<(String, Kind)> = Vec::new();
    let index = |name: &str, kind: Kind, vars: &mut Vec<(String, Kind)>| -> usize {
        if let Some(i) = vars.iter().position(|(n, _)| n == name) {
            return i;
        }
        vars.push((name.to_string(), kind));
        vars.len() - 1
    };
    let mut checks = Vec::new();
    for p in &m.patterns {
        let mut prev = index(&p.start.var, Kind::Node, &mut vars);
        checks.push(Check::Node {
            var: prev,
            labels: p.start.labels.clone(),
            props: p.start.props.clone(),
        });
        for h in &p.hops {
            let r = index(&h.rel.var, Kind::Rel, &mut vars);
            let n = index(&h.node.var, Kind::Node, &mut vars);
            checks.push(Check::Node {
                var: n,
                labels: h.node.labels.clone(),
                props: h.node.props.clone(),
            });
            checks.push(Check::Rel {
                var: r,
                from: prev,
                to: n,
                outgoing: h.rel.direction == RelDirection::Outgoing,
                ty: h.rel.rel_type.clone(),
                props: h.rel.props.clone(),
            });
            prev = n;
        }
    }
    let node_ids: Vec<String> = g.nodes().map(|n| n.id.clone()).collect();
    let edge_ids: Vec<String> = g.edges().map(|e| e.id.clone()).collect();

    let mut assignments: Vec<Vec<String>> = Vec::new();
    let mut current: Vec<String> = Vec::new();
    product(g, &vars, &node_ids, &edge_ids, &checks, &mut current, &mut assignments);

    let names: HashMap<&str, usize> = vars.iter().enumerate().map(|(i, (n, _))| (n.as_str(), i)).collect();
    let mut kept = Vec::new();
    let mut failed = false;
    for a in assignments {
        let keep = match &m.filter {
            None => Some(true),
            Some(f) => match eval(g, &vars, &names, &a, f) {
                Ok(v) => v,
                Err(_) => {
                    failed = true;
                    None
                }
            },
        };
        if keep == Some(true) {
            kept.push(a);
        }
    }
    if failed {
        return Err(OracleError::TypeMismatch);
    }

    let ret = m.ret.as_ref().expect("query returns rows");
    let cell = |a: &[String], e: &ProjExpr| -> ResultValue {
        match e {
            ProjExpr::Var { name } => {
                let i = names[name.as_str()];
                match vars[i].1 {
                    Kind::Node => ResultValue::Node(g.node(&a[i]).unwrap().clone()),
                    Kind::Rel => ResultValue::Edge(g.edge(&a[i]).unwrap().clone()),
                }
            }
            ProjExpr::Property { var, key } => match prop(g, &vars, &names, a, var, key) {
                Some(v) => ResultValue::Scalar(v),
                None => ResultValue::Null,
            },
        }
    };
    let mut rows: Vec<(Vec<ResultValue>, Vec<ResultValue>)> = kept
        .iter()
        .map(|a| {
            let row: Vec<ResultValue> = ret.items.iter().map(|p| cell(a, &p.expr)).collect();
            let keys = ret
                .order_by
                .iter()
                .map(|k| {
                    if let ProjExpr::Var { name } = &k.expr {
                        if let Some(i) = ret.items.iter().position(|p| p.alias.as_deref() == Some(name)) {
                            return row[i].clone();
                        }
                    }
                    cell(a, &k.expr)
                })
                .collect();
            (keys, row)
        })
        .collect();
    if !ret.order_by.is_empty() {
        rows.sort_by(|(ka, ra), (kb, rb)| {
            let mut o = Ordering::Equal;
            for (i, k) in ret.order_by.iter().enumerate() {
                o = ka[i].cmp(&kb[i]);
                if k.descending {
                    o = o.reverse();
                }
                if o != Ordering::Equal {
                    break;
                }
            }
            o.then_with(|| ra.cmp(rb))
        });
    }
    let mut out: Vec<Vec<ResultValue>> = rows.into_iter().map(|(_, r)| r).collect();
    if let Some(l) = ret.limit {
        out.truncate(l as usize);
    }
    Ok(out)
}

fn product(
    g: &KnowledgeGraph,
    vars: &[(String, Kind)],
    node_ids: &[String],
    edge_ids: &[String],
    checks: &[Check],
    current: &mut Vec<String>,
    out: &mut Vec<Vec<String>>,
) {
    let i = current.len();
    if i == vars.len() {
        out.push(current.clone());
        return;
    }
    let domain = match vars[i].1 {
        Kind::Node => node_ids,
        Kind::Rel => edge_ids,
    };
    for id in domain {
        current.push(id.clone());
        // Only constraints fully decided by the prefix are tested; this
        // prunes the product without changing the surviving tuples.
        if consistent(g, vars, checks, current) {
            product(g, vars, node_ids, edge_ids, checks, current, out);
        }
        current.pop();
    }
}

fn consistent(g: &KnowledgeGraph, vars: &[(String, Kind)], checks: &[Check], a: &[String]) -> bool {
    let last = a.len() - 1;
    if vars[last].1 == Kind::Rel {
        for j in 0..last {
            if vars[j].1 == Kind::Rel && a[j] == a[last] {
                return false;
            }
        }
    }
    for c in checks {
        match c {
            Check::Node { var, labels, props } if *var == last => {
                let n = g.node(&a[*var]).unwrap();
                if !labels.iter().all(|l| n.labels.contains(l)) || !props_equal(&n.props, props) {
                    return false;
                }
            }
            Check::Rel {
                var,
                from,
                to,
                outgoing,
                ty,
                props,
            } if *var.max(from).max(to) == last => {
                let e = g.edge(&a[*var]).unwrap();
                let (s, d) = if *outgoing { (from, to) } else { (to, from) };
                if e.src != a[*s] || e.dst != a[*d] {
                    return false;
                }
                if ty.as_ref().is_some_and(|t| *t != e.label) || !props_equal(&e.props, props) {
                    return false;
                }
            }
            _ => {}
        }
    }
    true
}

fn numeric(v: &Value) -> Option<f64> {
    match v {
        Value::Int(i) => Some(*i as f64),
        Value::Float(f) => Some(*f),
        _ => None,
    }
}

fn order(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => Some(x.cmp(y)),
        (Value::Str(x), Value::Str(y)) => Some(x.cmp(y)),
        (Value::Bool(x), Value::Bool(y)) => Some(x.cmp(y)),
        _ => match (numeric(a), numeric(b)) {
            (Some(x), Some(y)) => x.partial_cmp(&y),
            _ => None,
        },
    }
}

fn props_equal(have: &std::collections::BTreeMap<String, Value>, want: &[(String, Value)]) -> bool {
    want.iter()
        .all(|(k, v)| have.get(k).and_then(|h| order(h, v)) == Some(Ordering::Equal))
}

fn prop(
    g: &KnowledgeGraph,
    vars: &[(String, Kind)],
    names: &HashMap<&str, usize>,
    a: &[String],
    var: &str,
    key: &str,
) -> Option<Value> {
    let i = names[var];
    match vars[i].1 {
        Kind::Node => g.node(&a[i])?.props.get(key).cloned(),
        Kind::Rel => g.edge(&a[i])?.props.get(key).cloned(),
    }
}

fn eval(
    g: &KnowledgeGraph,
    vars: &[(String, Kind)],
    names: &HashMap<&str, usize>,
    a: &[String],
    e: &Expr,
) -> Result<Option<bool>, OracleError> {
    let value = |o: &Operand| -> Option<Value> {
        match o {
            Operand::Literal { value } => Some(value.clone()),
            Operand::Property { var, key } => prop(g, vars, names, a, var, key),
        }
    };
    match e {
        Expr::Compare { left, op, right } => {
            let (Some(l), Some(r)) = (value(left), value(right)) else {
                return Ok(None);
            };
            let o = order(&l, &r).ok_or(OracleError::TypeMismatch)?;
            Ok(Some(match op {
                CmpOp::Eq => o == Ordering::Equal,
                CmpOp::Ne => o != Ordering::Equal,
                CmpOp::Lt => o == Ordering::Less,
                CmpOp::Gt => o == Ordering::Greater,
                CmpOp::Le => o != Ordering::Greater,
                CmpOp::Ge => o != Ordering::Less,
            }))
        }
        Expr::Not { inner } => Ok(eval(g, vars, names, a, inner)?.map(|b| !b)),
        Expr::And { terms } => {
            let mut acc = Some(true);
            for t in terms {
                acc = match (acc, eval(g, vars, names, a, t)?) {
                    (Some(false), _) | (_, Some(false)) => Some(false),
                    (None, _) | (_, None) => None,
                    _ => Some(true),
                };
            }
            Ok(acc)
        }
        Expr::Or { terms } => {
            let mut acc = Some(false);
            for t in terms {
                acc = match (acc, eval(g, vars, names, a, t)?) {
                    (Some(true), _) | (_, Some(true)) => Some(true),
                    (None, _) | (_, None) => None,
                    _ => Some(false),
                };
            }
            Ok(acc)
        }
    }
}
