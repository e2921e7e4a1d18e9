//! Evaluation harness: query datasets, system verdicts and the
//! classification and execution metrics computed from them.

mod generate;
mod metrics;

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::graph::KnowledgeGraph;
use crate::llm::{LlmError, TemplateError};
use crate::pipeline::{Pipeline, TaskClass, UserQuery};

pub use generate::{generate_queries, parse_question_list, record_id, Generated};
pub use metrics::{report, score, ClassMetrics, MetricsReport, ReportFormat, REFERENCE_ROW};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("io: {0}")]
    Io(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("verdict '{0}' has no matching record")]
    Join(String),
    #[error("no record with id '{0}'")]
    UnknownRecord(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordSource {
    Generated,
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReviewStatus {
    Pending,
    Approved,
    Rejected,
}

impl std::str::FromStr for ReviewStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pending" => Ok(Self::Pending),
            "approved" => Ok(Self::Approved),
            "rejected" => Ok(Self::Rejected),
            other => Err(format!("unknown review status '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub query: String,
    pub gold_class: TaskClass,
    pub domain: String,
    pub source: RecordSource,
    pub review_status: ReviewStatus,
}

impl EvalRecord {
    pub fn manual(
        id: impl Into<String>,
        query: impl Into<String>,
        gold_class: TaskClass,
        domain: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            query: query.into(),
            gold_class,
            domain: domain.into(),
            source: RecordSource::Manual,
            review_status: ReviewStatus::Approved,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemVerdict {
    pub record_id: String,
    pub predicted_class: TaskClass,
    pub executed_ok: bool,
    /// Always false when `executed_ok` is false.
    pub output_nonempty: bool,
    pub trace_ref: String,
}

impl SystemVerdict {
    pub fn new(
        record_id: impl Into<String>,
        predicted_class: TaskClass,
        executed_ok: bool,
        output_nonempty: bool,
        trace_ref: impl Into<String>,
    ) -> Self {
        Self {
            record_id: record_id.into(),
            predicted_class,
            executed_ok,
            output_nonempty: executed_ok && output_nonempty,
            trace_ref: trace_ref.into(),
        }
    }

    /// Counted toward the execution success rate.
    pub fn valid_output(&self) -> bool {
        self.executed_ok && self.output_nonempty
    }
}

/// One JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(source: R) -> Result<Vec<T>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line.map_err(|e| EvalError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| EvalError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize, W: Write>(items: &[T], mut sink: W) -> Result<(), EvalError> {
    for it in items {
        let line = serde_json::to_string(it).expect("records serialize");
        writeln!(sink, "{line}").map_err(|e| EvalError::Io(e.to_string()))?;
    }
    Ok(())
}

/// Collapses an append-only record log: the last line for an id wins, and
/// ids keep the position of their first line.
pub fn fold_records(lines: Vec<EvalRecord>) -> Vec<EvalRecord> {
    let mut pos: HashMap<String, usize> = HashMap::new();
    let mut out: Vec<EvalRecord> = Vec::new();
    for r in lines {
        match pos.get(&r.id) {
            Some(&i) => out[i] = r,
            None => {
                pos.insert(r.id.clone(), out.len());
                out.push(r);
            }
        }
    }
    out
}

fn io_err(path: &Path, e: std::io::Error) -> EvalError {
    EvalError::Io(format!("{}: {e}", path.display()))
}

pub fn load_records(path: &Path) -> Result<Vec<EvalRecord>, EvalError> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    Ok(fold_records(read_jsonl(std::io::BufReader::new(file))?))
}

pub fn append_records(path: &Path, records: &[EvalRecord]) -> Result<(), EvalError> {
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_err(path, e))?;
    write_jsonl(records, std::io::BufWriter::new(file))
}

/// Records a review decision by appending a new line for the record.
pub fn set_review_status(path: &Path, id: &str, status: ReviewStatus) -> Result<EvalRecord, EvalError> {
    let mut rec = load_records(path)?
        .into_iter()
        .find(|r| r.id == id)
        .ok_or_else(|| EvalError::UnknownRecord(id.to_string()))?;
    rec.review_status = status;
    append_records(path, std::slice::from_ref(&rec))?;
    Ok(rec)
}

pub fn load_verdicts(path: &Path) -> Result<Vec<SystemVerdict>, EvalError> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    read_jsonl(std::io::BufReader::new(file))
}

/// Runs every approved record through the pipeline, one session per record.
/// Failures become verdicts with `executed_ok = false`; a run that never
/// produced an intent counts as predicting the free-form class.
pub fn run_eval(records: &[EvalRecord], pipeline: &Pipeline, graph: &KnowledgeGraph) -> Vec<SystemVerdict> {
    let approved: Vec<&EvalRecord> = records
        .iter()
        .filter(|r| r.review_status == ReviewStatus::Approved)
        .collect();
    approved
        .par_iter()
        .map(|r| {
            let query = UserQuery {
                session_id: r.id.clone(),
                text: r.query.clone(),
                received_at: 0,
            };
            let (trace, ok) = match pipeline.run(&query, graph) {
                Ok(t) => {
                    let ok = t.succeeded();
                    (t, ok)
                }
                Err(f) => (f.trace, false),
            };
            let predicted = trace.intent.as_ref().map_or(TaskClass::Freestyle, |i| i.task_class);
            let nonempty = trace
                .response
                .as_ref()
                .is_some_and(|a| !a.direct_answer.trim().is_empty());
            SystemVerdict::new(&r.id, predicted, ok, nonempty, &trace.id)
        })
        .collect()
}
