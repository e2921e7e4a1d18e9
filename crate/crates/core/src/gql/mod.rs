//! A Cypher fragment: `MATCH`, `WHERE`, `CREATE`, `RETURN`, `ORDER BY`,
//! `LIMIT`. Parsing and rendering are pure; execution runs against a
//! [`KnowledgeGraph`].

pub mod ast;
mod exec;
mod lexer;
mod parser;
mod render;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::{EdgeRecord, GraphError, KnowledgeGraph, NodeRecord, Value};
pub use ast::*;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QueryError {
    #[error("syntax error at {position}: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        position: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("unsupported syntax at {position}: {feature}")]
    Unsupported { feature: String, position: usize },
    #[error("undeclared variable '{name}' at {position}")]
    UndeclaredVariable { name: String, position: usize },
    #[error("invalid pattern at {position}: {message}")]
    InvalidPattern { message: String, position: usize },
    #[error("type mismatch: cannot compare {left} {op} {right}")]
    TypeMismatch { left: String, right: String, op: String },
    #[error("query writes to the graph but a read-only execution was requested")]
    ReadOnly,
    #[error("empty query")]
    EmptyQuery,
    #[error("execution failed: {0}")]
    Execution(#[from] GraphError),
}

impl QueryError {
    /// 1-based character offset, when the error points into the text.
    pub fn position(&self) -> Option<usize> {
        match self {
            QueryError::Syntax { position, .. }
            | QueryError::Unsupported { position, .. }
            | QueryError::UndeclaredVariable { position, .. }
            | QueryError::InvalidPattern { position, .. } => Some(*position),
            _ => None,
        }
    }
}

/// A parsed query: source text, AST and the variables it binds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphQuery {
    pub text: String,
    pub ast: Statement,
    pub variables: Vec<String>,
}

impl GraphQuery {
    pub fn is_read_only(&self) -> bool {
        self.ast.is_read_only()
    }
}

impl fmt::Display for GraphQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}

pub fn parse(text: &str) -> Result<GraphQuery, QueryError> {
    let parsed = parser::parse(text)?;
    Ok(GraphQuery {
        text: text.to_string(),
        ast: parsed.statement,
        variables: parsed.variables,
    })
}

/// Canonical text for a query. Re-parsing it yields an equal AST.
pub fn render(query: &GraphQuery) -> String {
    render::statement(&query.ast)
}

pub(crate) fn column_name(p: &Projection) -> String {
    if let Some(a) = &p.alias {
        return a.clone();
    }
    match &p.expr {
        ProjExpr::Var { name } => name.clone(),
        ProjExpr::Property { var, key } => format!("{var}.{key}"),
    }
}

/// How `CREATE` treats records that already exist.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum DuplicatePolicy {
    /// A node whose derived id exists fails the query with `DuplicateId`.
    #[default]
    Error,
    /// An existing node id is reused, and an existing `(src, label, dst)`
    /// triple is left alone.
    Skip,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExecOptions {
    pub duplicates: DuplicatePolicy,
}

/// One cell of a result row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ResultValue {
    Scalar(Value),
    Node(NodeRecord),
    Edge(EdgeRecord),
    Null,
}

impl ResultValue {
    fn rank(&self) -> u8 {
        match self {
            ResultValue::Scalar(_) => 0,
            ResultValue::Node(_) => 1,
            ResultValue::Edge(_) => 2,
            ResultValue::Null => 3,
        }
    }

    pub fn as_scalar(&self) -> Option<&Value> {
        match self {
            ResultValue::Scalar(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_node(&self) -> Option<&NodeRecord> {
        match self {
            ResultValue::Node(n) => Some(n),
            _ => None,
        }
    }
}

/// Scalars sort first, then nodes and edges by id; nulls sort last.
impl Ord for ResultValue {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ResultValue::Scalar(a), ResultValue::Scalar(b)) => a.cmp(b),
            (ResultValue::Node(a), ResultValue::Node(b)) => a.id.cmp(&b.id),
            (ResultValue::Edge(a), ResultValue::Edge(b)) => a.id.cmp(&b.id),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for ResultValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ResultValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResultValue::Scalar(v) => write!(f, "{v}"),
            ResultValue::Node(n) => write!(f, "({}:{})", n.id, n.labels.join(":")),
            ResultValue::Edge(e) => write!(f, "[{}:{} {}->{}]", e.id, e.label, e.src, e.dst),
            ResultValue::Null => f.write_str("null"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryStats {
    pub nodes_created: usize,
    pub edges_created: usize,
    pub rows_returned: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryResult {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<ResultValue>>,
    pub stats: QueryStats,
}

impl QueryResult {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Runs a query, committing any `CREATE` output as one mutation batch.
pub fn execute(
    query: &GraphQuery,
    graph: &mut KnowledgeGraph,
    options: ExecOptions,
) -> Result<QueryResult, QueryError> {
    let (result, batch) = exec::run(&query.ast, graph, options)?;
    if !batch.is_empty() {
        graph.mutate(&batch)?;
    }
    Ok(result)
}

/// Runs a query that must not write.
pub fn execute_read(query: &GraphQuery, graph: &KnowledgeGraph) -> Result<QueryResult, QueryError> {
    if !query.is_read_only() {
        return Err(QueryError::ReadOnly);
    }
    let (result, _) = exec::run(&query.ast, graph, ExecOptions::default())?;
    Ok(result)
}
