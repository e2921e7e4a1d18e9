use serde::Serialize;

use crate::graph::Value;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statement {
    Match(MatchStatement),
    Create(CreateStatement),
}

impl Statement {
    pub fn create_clause(&self) -> Option<&[PathPattern]> {
        match self {
            Statement::Match(m) => m.create.as_deref(),
            Statement::Create(c) => Some(&c.create),
        }
    }

    pub fn return_clause(&self) -> Option<&ReturnClause> {
        match self {
            Statement::Match(m) => m.ret.as_ref(),
            Statement::Create(c) => c.ret.as_ref(),
        }
    }

    pub fn is_read_only(&self) -> bool {
        self.create_clause().is_none()
    }
}

/// `MATCH ... [WHERE ...] [CREATE ...] [RETURN ...]`
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatchStatement {
    pub patterns: Vec<PathPattern>,
    pub filter: Option<Expr>,
    pub create: Option<Vec<PathPattern>>,
    pub ret: Option<ReturnClause>,
}

/// `CREATE ... [RETURN ...]`
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CreateStatement {
    pub create: Vec<PathPattern>,
    pub ret: Option<ReturnClause>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathPattern {
    pub start: NodePattern,
    pub hops: Vec<Hop>,
}

impl PathPattern {
    pub fn nodes(&self) -> impl Iterator<Item = &NodePattern> {
        std::iter::once(&self.start).chain(self.hops.iter().map(|h| &h.node))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Hop {
    pub rel: RelPattern,
    pub node: NodePattern,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodePattern {
    pub var: String,
    pub labels: Vec<String>,
    pub props: Vec<(String, Value)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RelDirection {
    /// `-[]->`
    Outgoing,
    /// `<-[]-`
    Incoming,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RelPattern {
    pub var: String,
    pub rel_type: Option<String>,
    pub direction: RelDirection,
    pub props: Vec<(String, Value)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Expr {
    Or { terms: Vec<Expr> },
    And { terms: Vec<Expr> },
    Not { inner: Box<Expr> },
    Compare { left: Operand, op: CmpOp, right: Operand },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Operand {
    Property { var: String, key: String },
    Literal { value: Value },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "<>",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReturnClause {
    pub items: Vec<Projection>,
    pub order_by: Vec<SortKey>,
    pub limit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProjExpr {
    Var { name: String },
    Property { var: String, key: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Projection {
    pub expr: ProjExpr,
    pub alias: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SortKey {
    pub expr: ProjExpr,
    pub descending: bool,
}
