//! The seven-agent question-answering pipeline: intent, extraction,
//! planning, graph interaction, reasoning, response and knowledge update.

mod agents;
mod execute;
mod integrate;
mod run;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::embedding::LinkResult;
use crate::gql::QueryResult;
use crate::graph::{EdgeRecord, NodeRecord};
use crate::llm::LlmError;

pub use agents::{
    classify_intent, extract_concepts, order_tasks, plan_tasks, reason, respond, EMPTY_EVIDENCE, INSUFFICIENT_EVIDENCE,
    SYSTEM_PROMPT,
};
pub use execute::{execute_task, refine_prompt, schema_json, TaskContext};
pub use integrate::{apply_delta, integrate, IntegrationOutcome, NewInfo};
pub use run::{Clock, FixedClock, Pipeline, RunFailure, SystemClock};

/// The seven task classes, numbered as in the intent prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum TaskClass {
    RelationJudgment = 1,
    PrerequisitePrediction = 2,
    PathSearching = 3,
    ConceptClustering = 4,
    SubgraphCompletion = 5,
    IdeaHamster = 6,
    Freestyle = 7,
}

impl TaskClass {
    pub const ALL: [TaskClass; 7] = [
        TaskClass::RelationJudgment,
        TaskClass::PrerequisitePrediction,
        TaskClass::PathSearching,
        TaskClass::ConceptClustering,
        TaskClass::SubgraphCompletion,
        TaskClass::IdeaHamster,
        TaskClass::Freestyle,
    ];

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskClass::RelationJudgment => "Relation Judgment",
            TaskClass::PrerequisitePrediction => "Prerequisite Prediction",
            TaskClass::PathSearching => "Path Searching",
            TaskClass::ConceptClustering => "Concept Clustering",
            TaskClass::SubgraphCompletion => "Subgraph Completion",
            TaskClass::IdeaHamster => "Idea Hamster",
            TaskClass::Freestyle => "Freestyle NLP Question",
        }
    }

    /// `"3 (Path Searching)"`, the form used in prompts.
    pub fn label(self) -> String {
        format!("{} ({})", self.number(), self.name())
    }
}

impl TryFrom<u8> for TaskClass {
    type Error = String;

    fn try_from(n: u8) -> Result<Self, Self::Error> {
        TaskClass::ALL
            .get((n as usize).wrapping_sub(1))
            .copied()
            .ok_or_else(|| format!("task class {n} outside 1..=7"))
    }
}

impl From<TaskClass> for u8 {
    fn from(c: TaskClass) -> u8 {
        c.number()
    }
}

impl fmt::Display for TaskClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Intent,
    Extraction,
    Planning,
    Execution,
    Reasoning,
    Response,
    Integration,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Intent => "intent",
            Stage::Extraction => "extraction",
            Stage::Planning => "planning",
            Stage::Execution => "execution",
            Stage::Reasoning => "reasoning",
            Stage::Response => "response",
            Stage::Integration => "integration",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One generated query and what happened to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryAttempt {
    pub query: String,
    pub error: Option<String>,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FailureKind {
    #[error("empty query")]
    EmptyQuery,
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("{0}")]
    InvalidOutput(String),
    #[error("plan has a dependency cycle {0:?}")]
    CyclicPlan(Vec<u32>),
    #[error("task {task} depends on missing task {missing}")]
    DanglingDependency { task: u32, missing: u32 },
    #[error("task {task} failed after {} attempts", attempts.len())]
    TaskFailed { task: u32, attempts: Vec<QueryAttempt> },
    #[error("verification query {index} returned no rows")]
    IntegrationFailed { index: usize },
    #[error("{0}")]
    Query(String),
}

/// Failure of one pipeline stage.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{stage}: {kind}")]
pub struct PipelineError {
    pub stage: Stage,
    pub kind: FailureKind,
}

impl PipelineError {
    pub fn new(stage: Stage, kind: impl Into<FailureKind>) -> Self {
        Self {
            stage,
            kind: kind.into(),
        }
    }

    pub fn invalid(stage: Stage, message: impl Into<String>) -> Self {
        Self::new(stage, FailureKind::InvalidOutput(message.into()))
    }

    pub fn cause(&self) -> String {
        self.kind.to_string()
    }
}

/// Serializable summary of a [`PipelineError`] kept in the trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: Stage,
    pub cause: String,
}

impl From<&PipelineError> for StageFailure {
    fn from(e: &PipelineError) -> Self {
        Self {
            stage: e.stage,
            cause: e.cause(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryMode {
    /// Graph algorithms for classes 1 to 6; generated queries only for 7.
    Deterministic,
    /// Generated queries for every class.
    Llm,
    /// Graph algorithms for classes 1 to 5, generated queries for 6 and 7.
    #[default]
    Hybrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub query_mode: QueryMode,
    /// Intent confidence below this (percent) downgrades to free-form.
    pub confidence_threshold: f64,
    /// Total query attempts per task in generated-query mode.
    pub refine_budget: usize,
    pub link_k: usize,
    pub link_threshold: f64,
    /// Past (query, answer) pairs added to intent and reasoning prompts.
    pub history_window: usize,
    pub prereq_relation: String,
    pub completion_k: usize,
    pub idea_radius: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            query_mode: QueryMode::Hybrid,
            confidence_threshold: 60.0,
            refine_budget: 3,
            link_k: crate::embedding::DEFAULT_K,
            link_threshold: crate::embedding::DEFAULT_THRESHOLD,
            history_window: 5,
            prereq_relation: crate::taskops::DEFAULT_PREREQ_RELATION.to_string(),
            completion_k: 5,
            idea_radius: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserQuery {
    pub session_id: String,
    pub text: String,
    /// Milliseconds since the Unix epoch.
    pub received_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentClassification {
    pub task_class: TaskClass,
    pub confidence: f64,
    pub key_concepts: Vec<String>,
    pub reasoning: String,
    /// The model's class when low confidence forced free-form routing.
    pub downgraded_from: Option<TaskClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkedMention {
    pub mention: String,
    pub link: LinkResult<f64>,
}

impl LinkedMention {
    pub fn node_id(&self) -> Option<&str> {
        self.link.node_id.as_deref()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedRelation {
    pub relation_type: String,
    pub source: String,
    pub target: String,
    /// Closest relation type present in the graph, if any clears the threshold.
    pub linked_type: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptExtraction {
    pub task_class: TaskClass,
    /// Mentions in role order: for relation judgment the two compared
    /// concepts, for prerequisite prediction the target, for path search
    /// start then goal.
    pub entities: Vec<LinkedMention>,
    pub relations: Vec<ExtractedRelation>,
    pub domain: Option<String>,
    pub relation_description: Option<String>,
}

impl ConceptExtraction {
    pub fn mentions(&self) -> Vec<String> {
        self.entities.iter().map(|e| e.mention.clone()).collect()
    }

    pub fn linked_ids(&self) -> Vec<String> {
        self.entities
            .iter()
            .filter_map(|e| e.node_id().map(str::to_string))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskNode {
    pub id: u32,
    pub description: String,
    pub dependencies: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskPlan {
    pub tasks: Vec<TaskNode>,
    pub execution_order: Vec<u32>,
    pub goal_analysis: String,
}

impl TaskPlan {
    pub fn task(&self, id: u32) -> Option<&TaskNode> {
        self.tasks.iter().find(|t| t.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionMode {
    Deterministic,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskExecution {
    pub task_id: u32,
    pub description: String,
    pub mode: ExecutionMode,
    /// The graph operation run in deterministic mode.
    pub operation: Option<String>,
    pub attempts: Vec<QueryAttempt>,
    pub result: Option<QueryResult>,
    pub warnings: Vec<String>,
}

impl TaskExecution {
    pub fn row_count(&self) -> usize {
        self.result.as_ref().map_or(0, |r| r.rows.len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningOutput {
    pub key_observations: Vec<String>,
    pub inferred_relationships: Vec<String>,
    pub logical_inferences: Vec<String>,
    pub contextual_interpretation: String,
    pub conclusion: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentResponse {
    pub direct_answer: String,
    pub detailed_explanation: String,
    pub examples: Vec<String>,
    pub caveats: Vec<String>,
    pub further_exploration: Vec<String>,
    pub trace_ref: String,
}

impl AgentResponse {
    /// Numbered or bulleted items of the detailed explanation.
    pub fn explanation_points(&self) -> Vec<String> {
        self.detailed_explanation
            .lines()
            .map(str::trim)
            .filter_map(|l| {
                let rest = l.trim_start_matches(|c: char| c.is_ascii_digit());
                if rest.len() < l.len() && rest.starts_with('.') {
                    Some(rest[1..].trim().to_string())
                } else {
                    l.strip_prefix("- ").map(|r| r.trim().to_string())
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct UpdateDelta {
    pub new_nodes: Vec<NodeRecord>,
    pub new_edges: Vec<EdgeRecord>,
    pub integration_queries: Vec<String>,
    pub verification_queries: Vec<String>,
}

impl UpdateDelta {
    pub fn is_empty(&self) -> bool {
        self.new_nodes.is_empty() && self.new_edges.is_empty() && self.integration_queries.is_empty()
    }
}

/// One LLM exchange, numbered from zero within its run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceCall {
    pub index: usize,
    pub stage: String,
    pub prompt: String,
    pub reply: Result<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub millis: u64,
}

/// Everything one run did, stage by stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub id: String,
    pub query: UserQuery,
    pub graph_version: u64,
    pub intent: Option<IntentClassification>,
    pub extraction: Option<ConceptExtraction>,
    pub plan: Option<TaskPlan>,
    pub plan_skipped: bool,
    pub tasks: Vec<TaskExecution>,
    pub reasoning: Option<ReasoningOutput>,
    pub response: Option<AgentResponse>,
    pub timings: Vec<StageTiming>,
    pub llm_calls: Vec<TraceCall>,
    pub error: Option<StageFailure>,
}

impl PipelineTrace {
    pub fn succeeded(&self) -> bool {
        self.error.is_none() && self.response.is_some()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }
}
