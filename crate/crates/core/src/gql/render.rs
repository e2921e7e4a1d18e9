use std::fmt::Write;

use super::ast::*;
use crate::graph::Value;

const RESERVED: &[&str] = &[
    "true",
    "false",
    "null",
    "match",
    "where",
    "create",
    "return",
    "order",
    "by",
    "limit",
    "and",
    "or",
    "not",
    "xor",
    "as",
    "asc",
    "desc",
    "ascending",
    "descending",
    "skip",
    "distinct",
];

pub(super) fn statement(stmt: &Statement) -> String {
    let mut out = String::new();
    match stmt {
        Statement::Match(m) => {
            out.push_str("MATCH ");
            patterns(&mut out, &m.patterns);
            if let Some(f) = &m.filter {
                out.push_str(" WHERE ");
                expr(&mut out, f);
            }
            if let Some(c) = &m.create {
                out.push_str(" CREATE ");
                patterns(&mut out, c);
            }
            if let Some(r) = &m.ret {
                return_clause(&mut out, r);
            }
        }
        Statement::Create(c) => {
            out.push_str("CREATE ");
            patterns(&mut out, &c.create);
            if let Some(r) = &c.ret {
                return_clause(&mut out, r);
            }
        }
    }
    out
}

pub(super) fn ident(name: &str) -> String {
    let mut chars = name.chars();
    let simple = chars.next().is_some_and(|c| c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_')
        && !RESERVED.iter().any(|k| k.eq_ignore_ascii_case(name));
    if simple {
        name.to_string()
    } else {
        format!("`{}`", name.replace('`', "``"))
    }
}

pub(super) fn literal(v: &Value) -> String {
    match v {
        Value::Bool(b) => b.to_string(),
        Value::Int(i) => i.to_string(),
        Value::Float(f) => format!("{f:?}"),
        Value::Str(s) => {
            let mut out = String::with_capacity(s.len() + 2);
            out.push('\'');
            for c in s.chars() {
                match c {
                    '\\' => out.push_str("\\\\"),
                    '\'' => out.push_str("\\'"),
                    '\n' => out.push_str("\\n"),
                    '\t' => out.push_str("\\t"),
                    '\r' => out.push_str("\\r"),
                    c => out.push(c),
                }
            }
            out.push('\'');
            out
        }
    }
}

fn patterns(out: &mut String, ps: &[PathPattern]) {
    for (i, p) in ps.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        node(out, &p.start);
        for h in &p.hops {
            rel(out, &h.rel);
            node(out, &h.node);
        }
    }
}

fn props(out: &mut String, ps: &[(String, Value)]) {
    if ps.is_empty() {
        return;
    }
    out.push_str(" {");
    for (i, (k, v)) in ps.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{}: {}", ident(k), literal(v));
    }
    out.push('}');
}

fn node(out: &mut String, n: &NodePattern) {
    out.push('(');
    out.push_str(&ident(&n.var));
    for l in &n.labels {
        out.push(':');
        out.push_str(&ident(l));
    }
    props(out, &n.props);
    out.push(')');
}

fn rel(out: &mut String, r: &RelPattern) {
    out.push_str(match r.direction {
        RelDirection::Outgoing => "-[",
        RelDirection::Incoming => "<-[",
    });
    out.push_str(&ident(&r.var));
    if let Some(t) = &r.rel_type {
        out.push(':');
        out.push_str(&ident(t));
    }
    props(out, &r.props);
    out.push_str(match r.direction {
        RelDirection::Outgoing => "]->",
        RelDirection::Incoming => "]-",
    });
}

fn expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Or { terms } => join(out, terms, " OR ", |t| matches!(t, Expr::Or { .. })),
        Expr::And { terms } => join(out, terms, " AND ", |t| matches!(t, Expr::Or { .. } | Expr::And { .. })),
        Expr::Not { inner } => {
            out.push_str("NOT ");
            wrapped(out, inner, matches!(**inner, Expr::Or { .. } | Expr::And { .. }));
        }
        Expr::Compare { left, op, right } => {
            operand(out, left);
            let _ = write!(out, " {} ", op.symbol());
            operand(out, right);
        }
    }
}

fn join(out: &mut String, terms: &[Expr], sep: &str, needs_parens: impl Fn(&Expr) -> bool) {
    for (i, t) in terms.iter().enumerate() {
        if i > 0 {
            out.push_str(sep);
        }
        wrapped(out, t, needs_parens(t));
    }
}

fn wrapped(out: &mut String, e: &Expr, parens: bool) {
    if parens {
        out.push('(');
        expr(out, e);
        out.push(')');
    } else {
        expr(out, e);
    }
}

fn operand(out: &mut String, o: &Operand) {
    match o {
        Operand::Property { var, key } => {
            let _ = write!(out, "{}.{}", ident(var), ident(key));
        }
        Operand::Literal { value } => out.push_str(&literal(value)),
    }
}

fn proj(out: &mut String, p: &ProjExpr) {
    match p {
        ProjExpr::Var { name } => out.push_str(&ident(name)),
        ProjExpr::Property { var, key } => {
            let _ = write!(out, "{}.{}", ident(var), ident(key));
        }
    }
}

fn return_clause(out: &mut String, r: &ReturnClause) {
    out.push_str(" RETURN ");
    for (i, p) in r.items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        proj(out, &p.expr);
        if let Some(a) = &p.alias {
            out.push_str(" AS ");
            out.push_str(&ident(a));
        }
    }
    if !r.order_by.is_empty() {
        out.push_str(" ORDER BY ");
        for (i, k) in r.order_by.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            proj(out, &k.expr);
            if k.descending {
                out.push_str(" DESC");
            }
        }
    }
    if let Some(n) = r.limit {
        let _ = write!(out, " LIMIT {n}");
    }
}
