//! Recursive-descent parser for the supported Cypher fragment.

use std::collections::{BTreeSet, HashMap};

use super::ast::*;
use super::lexer::{tokenize, Spanned, Tok};
use super::QueryError;
use crate::graph::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarKind {
    Node,
    Rel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Clause {
    Match,
    Create,
}

const UNSUPPORTED_CLAUSES: &[&str] = &[
    "MERGE", "SET", "DELETE", "DETACH", "REMOVE", "WITH", "UNWIND", "OPTIONAL", "UNION", "CALL", "FOREACH", "LOAD",
    "USE", "SHOW", "EXPLAIN", "PROFILE",
];

pub(crate) struct Parsed {
    pub statement: Statement,
    pub variables: Vec<String>,
}

pub(crate) fn parse(text: &str) -> Result<Parsed, QueryError> {
    if text.trim().is_empty() {
        return Err(QueryError::EmptyQuery);
    }
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks,
        i: 0,
        scope: HashMap::new(),
        match_rels: BTreeSet::new(),
    };
    let mut statement = p.statement()?;
    let variables = assign_anonymous(&mut statement);
    Ok(Parsed { statement, variables })
}

struct Parser {
    toks: Vec<Spanned>,
    i: usize,
    scope: HashMap<String, VarKind>,
    match_rels: BTreeSet<String>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let idx = (self.i + n).min(self.toks.len() - 1);
        &self.toks[idx].tok
    }

    fn pos(&self) -> usize {
        self.toks[self.i].pos
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].tok.clone();
        if self.i < self.toks.len() - 1 {
            self.i += 1;
        }
        t
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident { text, quoted: false } if text.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), QueryError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.syntax(&[what]))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), QueryError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.syntax(&[kw]))
        }
    }

    fn syntax(&self, expected: &[&str]) -> QueryError {
        QueryError::Syntax {
            position: self.pos(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        }
    }

    fn unsupported(&self, feature: &str) -> QueryError {
        QueryError::Unsupported {
            feature: feature.to_string(),
            position: self.pos(),
        }
    }

    fn check_unsupported_clause(&self) -> Result<(), QueryError> {
        for kw in UNSUPPORTED_CLAUSES {
            if self.is_kw(kw) {
                return Err(self.unsupported(&format!("{kw} clause")));
            }
        }
        Ok(())
    }

    fn ident(&mut self, what: &str) -> Result<String, QueryError> {
        match self.peek().clone() {
            Tok::Ident { text, .. } => {
                self.bump();
                Ok(text)
            }
            _ => Err(self.syntax(&[what])),
        }
    }

    fn statement(&mut self) -> Result<Statement, QueryError> {
        self.check_unsupported_clause()?;
        let stmt = if self.eat_kw("MATCH") {
            let patterns = self.patterns(Clause::Match)?;
            let filter = if self.eat_kw("WHERE") { Some(self.expr()?) } else { None };
            if self.is_kw("MATCH") {
                return Err(self.unsupported("multiple MATCH clauses"));
            }
            self.check_unsupported_clause()?;
            let create = if self.eat_kw("CREATE") {
                Some(self.patterns(Clause::Create)?)
            } else {
                None
            };
            self.check_unsupported_clause()?;
            let ret = if self.eat_kw("RETURN") {
                Some(self.return_clause()?)
            } else {
                None
            };
            if create.is_none() && ret.is_none() {
                return Err(self.syntax(&["WHERE", "CREATE", "RETURN"]));
            }
            Statement::Match(MatchStatement {
                patterns,
                filter,
                create,
                ret,
            })
        } else if self.eat_kw("CREATE") {
            let create = self.patterns(Clause::Create)?;
            self.check_unsupported_clause()?;
            let ret = if self.eat_kw("RETURN") {
                Some(self.return_clause()?)
            } else {
                None
            };
            Statement::Create(CreateStatement { create, ret })
        } else if self.is_kw("RETURN") {
            return Err(self.unsupported("RETURN without MATCH"));
        } else {
            return Err(self.syntax(&["MATCH", "CREATE"]));
        };
        self.check_unsupported_clause()?;
        if *self.peek() == Tok::Semicolon {
            self.bump();
        }
        if *self.peek() != Tok::Eof {
            return Err(self.syntax(&["end of query"]));
        }
        Ok(stmt)
    }

    fn patterns(&mut self, clause: Clause) -> Result<Vec<PathPattern>, QueryError> {
        let mut out = vec![self.path(clause)?];
        while *self.peek() == Tok::Comma {
            self.bump();
            out.push(self.path(clause)?);
        }
        Ok(out)
    }

    fn path(&mut self, clause: Clause) -> Result<PathPattern, QueryError> {
        if let Tok::Ident { quoted: false, .. } = self.peek() {
            if *self.peek_at(1) == Tok::Eq {
                return Err(self.unsupported("named path"));
            }
        }
        let start_pos = self.pos();
        let start = self.node(clause)?;
        let mut hops = Vec::new();
        while matches!(self.peek(), Tok::Minus | Tok::Lt) {
            let rel = self.rel(clause)?;
            let node = self.node(clause)?;
            hops.push(Hop { rel, node });
        }
        if clause == Clause::Create && hops.is_empty() && !start.var.is_empty() {
            // `CREATE (a)` on an already bound variable creates nothing.
            if self.bound_before_create(&start.var) {
                return Err(QueryError::InvalidPattern {
                    message: format!("variable '{}' is already bound", start.var),
                    position: start_pos,
                });
            }
        }
        if clause == Clause::Create {
            for n in std::iter::once(&start).chain(hops.iter().map(|h| &h.node)) {
                if !n.var.is_empty() {
                    self.scope.entry(n.var.clone()).or_insert(VarKind::Node);
                }
            }
        }
        Ok(PathPattern { start, hops })
    }

    fn bound_before_create(&self, var: &str) -> bool {
        // Nodes declared while parsing the current CREATE pattern are inserted
        // into scope only after the path completes, so scope holds the
        // MATCH bindings plus earlier CREATE paths here.
        self.scope.contains_key(var)
    }

    fn node(&mut self, clause: Clause) -> Result<NodePattern, QueryError> {
        let pos = self.pos();
        self.expect(Tok::LParen, "(")?;
        let mut var = String::new();
        if let Tok::Ident { text, .. } = self.peek().clone() {
            self.bump();
            var = text;
        }
        let mut labels = Vec::new();
        while *self.peek() == Tok::Colon {
            self.bump();
            let l = self.ident("label")?;
            if !labels.contains(&l) {
                labels.push(l);
            }
        }
        let props = if *self.peek() == Tok::LBrace {
            self.prop_map()?
        } else {
            Vec::new()
        };
        if *self.peek() == Tok::Dollar {
            return Err(self.unsupported("parameters"));
        }
        self.expect(Tok::RParen, ")")?;

        if !var.is_empty() {
            match (self.scope.get(&var), clause) {
                (Some(VarKind::Rel), _) => {
                    return Err(QueryError::InvalidPattern {
                        message: format!("variable '{var}' is bound to a relationship"),
                        position: pos,
                    })
                }
                (Some(VarKind::Node), Clause::Create) if !labels.is_empty() || !props.is_empty() => {
                    return Err(QueryError::InvalidPattern {
                        message: format!(
                            "variable '{var}' is already bound; labels and properties cannot be added in CREATE"
                        ),
                        position: pos,
                    })
                }
                (None, Clause::Match) => {
                    self.scope.insert(var.clone(), VarKind::Node);
                }
                _ => {}
            }
        }
        Ok(NodePattern { var, labels, props })
    }

    fn rel(&mut self, clause: Clause) -> Result<RelPattern, QueryError> {
        let pos = self.pos();
        let incoming = if *self.peek() == Tok::Lt {
            self.bump();
            true
        } else {
            false
        };
        self.expect(Tok::Minus, "-")?;
        let (var, rel_type, props) = if *self.peek() == Tok::LBracket {
            self.bump();
            let mut var = String::new();
            if let Tok::Ident { text, .. } = self.peek().clone() {
                self.bump();
                var = text;
            }
            let mut rel_type = None;
            if *self.peek() == Tok::Colon {
                self.bump();
                rel_type = Some(self.ident("relationship type")?);
                if *self.peek() == Tok::Pipe {
                    return Err(self.unsupported("relationship type alternation"));
                }
            }
            if *self.peek() == Tok::Star {
                return Err(self.unsupported("variable-length path"));
            }
            let props = if *self.peek() == Tok::LBrace {
                self.prop_map()?
            } else {
                Vec::new()
            };
            self.expect(Tok::RBracket, "]")?;
            (var, rel_type, props)
        } else {
            (String::new(), None, Vec::new())
        };
        self.expect(Tok::Minus, "-")?;
        let outgoing = if *self.peek() == Tok::Gt {
            self.bump();
            true
        } else {
            false
        };
        let direction = match (incoming, outgoing) {
            (false, true) => RelDirection::Outgoing,
            (true, false) => RelDirection::Incoming,
            (true, true) => {
                return Err(QueryError::Unsupported {
                    feature: "bidirectional relationship".into(),
                    position: pos,
                })
            }
            (false, false) => {
                return Err(QueryError::Unsupported {
                    feature: "undirected relationship".into(),
                    position: pos,
                })
            }
        };
        if clause == Clause::Create && rel_type.is_none() {
            return Err(QueryError::InvalidPattern {
                message: "CREATE requires a relationship type".into(),
                position: pos,
            });
        }
        if !var.is_empty() {
            match self.scope.get(&var) {
                Some(VarKind::Node) => {
                    return Err(QueryError::InvalidPattern {
                        message: format!("variable '{var}' is bound to a node"),
                        position: pos,
                    })
                }
                Some(VarKind::Rel) => {
                    return Err(QueryError::InvalidPattern {
                        message: format!("relationship variable '{var}' is used twice"),
                        position: pos,
                    })
                }
                None => {
                    self.scope.insert(var.clone(), VarKind::Rel);
                    if clause == Clause::Match {
                        self.match_rels.insert(var.clone());
                    }
                }
            }
        }
        Ok(RelPattern {
            var,
            rel_type,
            direction,
            props,
        })
    }

    fn prop_map(&mut self) -> Result<Vec<(String, Value)>, QueryError> {
        self.expect(Tok::LBrace, "{")?;
        let mut out: Vec<(String, Value)> = Vec::new();
        if *self.peek() != Tok::RBrace {
            loop {
                let pos = self.pos();
                let key = self.ident("property name")?;
                self.expect(Tok::Colon, ":")?;
                let value = self.literal()?;
                if out.iter().any(|(k, _)| *k == key) {
                    return Err(QueryError::InvalidPattern {
                        message: format!("duplicate property '{key}'"),
                        position: pos,
                    });
                }
                out.push((key, value));
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RBrace, "}")?;
        Ok(out)
    }

    fn literal(&mut self) -> Result<Value, QueryError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(Value::Str(s))
            }
            Tok::Number(n) => {
                self.bump();
                number(&n, false, pos)
            }
            Tok::Minus => {
                self.bump();
                match self.peek().clone() {
                    Tok::Number(n) => {
                        self.bump();
                        number(&n, true, pos)
                    }
                    _ => Err(self.syntax(&["number"])),
                }
            }
            Tok::Ident { text, quoted: false } if text.eq_ignore_ascii_case("true") => {
                self.bump();
                Ok(Value::Bool(true))
            }
            Tok::Ident { text, quoted: false } if text.eq_ignore_ascii_case("false") => {
                self.bump();
                Ok(Value::Bool(false))
            }
            Tok::Ident { text, quoted: false } if text.eq_ignore_ascii_case("null") => {
                Err(self.unsupported("null literal"))
            }
            Tok::Dollar => Err(self.unsupported("parameters")),
            Tok::LBracket => Err(self.unsupported("list literal")),
            Tok::LBrace => Err(self.unsupported("map literal")),
            _ => Err(self.syntax(&["literal"])),
        }
    }

    fn expr(&mut self) -> Result<Expr, QueryError> {
        let mut terms = vec![self.and_expr()?];
        while self.eat_kw("OR") {
            terms.push(self.and_expr()?);
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Expr::Or { terms }
        })
    }

    fn and_expr(&mut self) -> Result<Expr, QueryError> {
        let mut terms = vec![self.not_expr()?];
        loop {
            if self.is_kw("XOR") {
                return Err(self.unsupported("XOR"));
            }
            if !self.eat_kw("AND") {
                break;
            }
            terms.push(self.not_expr()?);
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Expr::And { terms }
        })
    }

    fn not_expr(&mut self) -> Result<Expr, QueryError> {
        if self.eat_kw("NOT") {
            return Ok(Expr::Not {
                inner: Box::new(self.not_expr()?),
            });
        }
        if *self.peek() == Tok::LParen {
            self.bump();
            let e = self.expr()?;
            self.expect(Tok::RParen, ")")?;
            return Ok(e);
        }
        let left = self.operand()?;
        let op = match self.peek() {
            Tok::Eq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            Tok::Lt => CmpOp::Lt,
            Tok::Gt => CmpOp::Gt,
            Tok::Le => CmpOp::Le,
            Tok::Ge => CmpOp::Ge,
            _ => {
                for kw in ["IS", "IN", "STARTS", "ENDS", "CONTAINS"] {
                    if self.is_kw(kw) {
                        return Err(self.unsupported(&format!("{kw} operator")));
                    }
                }
                if matches!(self.peek(), Tok::Plus | Tok::Minus | Tok::Star) {
                    return Err(self.unsupported("arithmetic"));
                }
                return Err(self.syntax(&["=", "<>", "<", ">", "<=", ">="]));
            }
        };
        self.bump();
        let right = self.operand()?;
        Ok(Expr::Compare { left, op, right })
    }

    fn operand(&mut self) -> Result<Operand, QueryError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Ident { text, quoted } => {
                if !quoted && ["true", "false", "null"].iter().any(|k| text.eq_ignore_ascii_case(k)) {
                    return Ok(Operand::Literal { value: self.literal()? });
                }
                if *self.peek_at(1) == Tok::LParen {
                    return Err(self.unsupported("function call"));
                }
                self.bump();
                if !self.scope.contains_key(&text) {
                    return Err(QueryError::UndeclaredVariable {
                        name: text,
                        position: pos,
                    });
                }
                if *self.peek() != Tok::Dot {
                    return Err(QueryError::Unsupported {
                        feature: "bare variable in predicate".into(),
                        position: pos,
                    });
                }
                self.bump();
                let key = self.ident("property name")?;
                Ok(Operand::Property { var: text, key })
            }
            _ => Ok(Operand::Literal { value: self.literal()? }),
        }
    }

    fn return_clause(&mut self) -> Result<ReturnClause, QueryError> {
        if self.is_kw("DISTINCT") {
            return Err(self.unsupported("DISTINCT"));
        }
        if *self.peek() == Tok::Star {
            return Err(self.unsupported("RETURN *"));
        }
        let mut items = Vec::new();
        let mut columns = BTreeSet::new();
        loop {
            let pos = self.pos();
            let expr = self.proj_expr(&[])?;
            let alias = if self.eat_kw("AS") {
                Some(self.ident("alias")?)
            } else {
                None
            };
            let p = Projection { expr, alias };
            if !columns.insert(super::column_name(&p)) {
                return Err(QueryError::InvalidPattern {
                    message: format!("duplicate column '{}'", super::column_name(&p)),
                    position: pos,
                });
            }
            items.push(p);
            if *self.peek() == Tok::Comma {
                self.bump();
            } else {
                break;
            }
        }
        let aliases: Vec<String> = items.iter().filter_map(|p| p.alias.clone()).collect();
        let mut order_by = Vec::new();
        if self.eat_kw("ORDER") {
            self.expect_kw("BY")?;
            loop {
                let expr = self.proj_expr(&aliases)?;
                let descending = if self.eat_kw("DESC") || self.eat_kw("DESCENDING") {
                    true
                } else {
                    let _ = self.eat_kw("ASC") || self.eat_kw("ASCENDING");
                    false
                };
                order_by.push(SortKey { expr, descending });
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        if self.is_kw("SKIP") {
            return Err(self.unsupported("SKIP"));
        }
        let limit = if self.eat_kw("LIMIT") {
            match self.peek().clone() {
                Tok::Number(n) if n.chars().all(|c| c.is_ascii_digit()) => {
                    self.bump();
                    Some(n.parse::<u64>().map_err(|_| self.syntax(&["LIMIT value"]))?)
                }
                _ => return Err(self.syntax(&["non-negative integer"])),
            }
        } else {
            None
        };
        Ok(ReturnClause { items, order_by, limit })
    }

    fn proj_expr(&mut self, aliases: &[String]) -> Result<ProjExpr, QueryError> {
        let pos = self.pos();
        let name = self.ident("variable")?;
        if *self.peek() == Tok::LParen {
            return Err(QueryError::Unsupported {
                feature: "function call".into(),
                position: pos,
            });
        }
        if *self.peek() == Tok::Dot {
            self.bump();
            let key = self.ident("property name")?;
            if !self.scope.contains_key(&name) {
                return Err(QueryError::UndeclaredVariable { name, position: pos });
            }
            return Ok(ProjExpr::Property { var: name, key });
        }
        if !self.scope.contains_key(&name) && !aliases.contains(&name) {
            return Err(QueryError::UndeclaredVariable { name, position: pos });
        }
        Ok(ProjExpr::Var { name })
    }
}

fn number(text: &str, negative: bool, pos: usize) -> Result<Value, QueryError> {
    let bad = || QueryError::Syntax {
        position: pos,
        expected: vec!["number".into()],
        found: text.to_string(),
    };
    if text.chars().all(|c| c.is_ascii_digit()) {
        let magnitude: i128 = text.parse().map_err(|_| bad())?;
        let v = if negative { -magnitude } else { magnitude };
        let v = i64::try_from(v).map_err(|_| bad())?;
        Ok(Value::Int(v))
    } else {
        let f: f64 = text.parse().map_err(|_| bad())?;
        if !f.is_finite() {
            return Err(bad());
        }
        Ok(Value::Float(if negative { -f } else { f }))
    }
}

/// Gives anonymous pattern elements stable `_vN` names, skipping any name
/// the query already uses. Returns all variables in first-appearance order.
fn assign_anonymous(stmt: &mut Statement) -> Vec<String> {
    let mut explicit = BTreeSet::new();
    for_each_var(stmt, &mut |v| {
        if !v.is_empty() {
            explicit.insert(v.clone());
        }
    });
    let mut counter = 0usize;
    let mut order: Vec<String> = Vec::new();
    for_each_var(stmt, &mut |v| {
        if v.is_empty() {
            loop {
                let candidate = format!("_v{counter}");
                counter += 1;
                if !explicit.contains(&candidate) {
                    *v = candidate;
                    break;
                }
            }
        }
        if !order.contains(v) {
            order.push(v.clone());
        }
    });
    order
}

fn for_each_var(stmt: &mut Statement, f: &mut impl FnMut(&mut String)) {
    let (first, second): (&mut [PathPattern], Option<&mut Vec<PathPattern>>) = match stmt {
        Statement::Match(m) => (&mut m.patterns, m.create.as_mut()),
        Statement::Create(c) => (&mut c.create, None),
    };
    for p in first.iter_mut().chain(second.into_iter().flatten()) {
        f(&mut p.start.var);
        for h in &mut p.hops {
            f(&mut h.rel.var);
            f(&mut h.node.var);
        }
    }
}
