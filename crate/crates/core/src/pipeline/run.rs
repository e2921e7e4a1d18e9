//! End-to-end orchestration of one user query.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::Mutex;

use super::agents::{classify_intent, extract_concepts, plan_tasks, reason, respond};
use super::execute::{execute_task, TaskContext};
use super::{
    ExecutionMode, FailureKind, PipelineConfig, PipelineError, PipelineTrace, Stage, StageTiming, TaskClass,
    TaskExecution, TaskNode, TraceCall, UserQuery,
};
use crate::embedding::{Embedder, EntityLinker};
use crate::graph::KnowledgeGraph;
use crate::llm::{sha256_hex, Gateway};
use crate::taskops;

/// Source of stage timestamps, in milliseconds.
pub trait Clock: Send + Sync {
    fn now_millis(&self) -> u64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_millis(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64)
    }
}

/// A clock that never moves, so every stage timing is zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct FixedClock(pub u64);

impl Clock for FixedClock {
    fn now_millis(&self) -> u64 {
        self.0
    }
}

/// A failed run together with the partial trace.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{error}")]
pub struct RunFailure {
    pub trace: PipelineTrace,
    pub error: PipelineError,
}

pub struct Pipeline {
    gateway: Gateway,
    linker: EntityLinker<f64>,
    config: PipelineConfig,
    clock: Arc<dyn Clock>,
    history: Mutex<HashMap<String, VecDeque<(String, String)>>>,
}

impl Pipeline {
    pub fn new(gateway: Gateway, embedder: Arc<dyn Embedder<f64>>, config: PipelineConfig) -> Self {
        let linker = EntityLinker::new(embedder).with_params(config.link_k, config.link_threshold);
        Self {
            gateway,
            linker,
            config,
            clock: Arc::new(SystemClock),
            history: Mutex::default(),
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn linker(&self) -> &EntityLinker<f64> {
        &self.linker
    }

    /// The retained (query, answer) pairs of a session, oldest first.
    pub fn history(&self, session: &str) -> Vec<(String, String)> {
        self.history
            .lock()
            .get(session)
            .map(|h| h.iter().cloned().collect())
            .unwrap_or_default()
    }

    pub fn clear_history(&self, session: &str) {
        self.history.lock().remove(session);
    }

    fn remember(&self, session: &str, query: &str, answer: &str) {
        let window = self.config.history_window;
        if window == 0 {
            return;
        }
        let mut all = self.history.lock();
        let h = all.entry(session.to_string()).or_default();
        h.push_back((query.to_string(), answer.to_string()));
        while h.len() > window {
            h.pop_front();
        }
    }

    pub fn trace_id(query: &UserQuery) -> String {
        sha256_hex(&format!("{}\n{}\n{}", query.session_id, query.received_at, query.text))[..16].to_string()
    }

    /// Runs every stage in order. On failure the trace records the failed
    /// stage and is returned inside the error.
    pub fn run(&self, query: &UserQuery, graph: &KnowledgeGraph) -> Result<PipelineTrace, Box<RunFailure>> {
        let gateway = self.gateway.scoped(query.session_id.clone());
        let mut trace = PipelineTrace {
            id: Self::trace_id(query),
            query: query.clone(),
            graph_version: graph.version(),
            intent: None,
            extraction: None,
            plan: None,
            plan_skipped: false,
            tasks: Vec::new(),
            reasoning: None,
            response: None,
            timings: Vec::new(),
            llm_calls: Vec::new(),
            error: None,
        };
        let outcome = self.stages(&mut trace, graph, &gateway);
        trace.llm_calls = gateway
            .log()
            .records()
            .into_iter()
            .enumerate()
            .map(|(index, r)| TraceCall {
                index,
                stage: r.tag,
                prompt: r.request.user,
                reply: r.reply,
            })
            .collect();
        match outcome {
            Ok(()) => {
                let answer = trace.response.as_ref().map_or("", |r| r.direct_answer.as_str());
                self.remember(&query.session_id, &query.text, answer);
                Ok(trace)
            }
            Err(error) => {
                trace.error = Some((&error).into());
                Err(Box::new(RunFailure { trace, error }))
            }
        }
    }

    fn timed<T>(
        &self,
        timings: &mut Vec<StageTiming>,
        stage: Stage,
        f: impl FnOnce() -> Result<T, PipelineError>,
    ) -> Result<T, PipelineError> {
        let start = self.clock.now_millis();
        let out = f();
        timings.push(StageTiming {
            stage,
            millis: self.clock.now_millis().saturating_sub(start),
        });
        out
    }

    fn stages(
        &self,
        trace: &mut PipelineTrace,
        graph: &KnowledgeGraph,
        gateway: &Gateway,
    ) -> Result<(), PipelineError> {
        let cfg = &self.config;
        let text = trace.query.text.clone();
        let history: Vec<(String, String)> = self.history(&trace.query.session_id);

        let intent = self.timed(&mut trace.timings, Stage::Intent, || {
            classify_intent(&text, gateway, &history, cfg.confidence_threshold)
        })?;
        trace.intent = Some(intent.clone());

        let extraction = self.timed(&mut trace.timings, Stage::Extraction, || {
            extract_concepts(&text, &intent, graph, gateway, &self.linker)
        })?;
        trace.extraction = Some(extraction.clone());

        let class = intent.task_class;
        let order: Vec<TaskNode> = if class == TaskClass::Freestyle {
            trace.plan_skipped = true;
            vec![TaskNode {
                id: 1,
                description: text.clone(),
                dependencies: Vec::new(),
            }]
        } else {
            let plan = self.timed(&mut trace.timings, Stage::Planning, || {
                plan_tasks(&text, &intent, &extraction, gateway)
            })?;
            trace.plan = Some(plan.clone());
            plan.execution_order
                .iter()
                .map(|id| plan.task(*id).expect("ordered ids exist").clone())
                .collect()
        };

        let tasks = &mut trace.tasks;
        self.timed(&mut trace.timings, Stage::Execution, || {
            for (k, task) in order.iter().enumerate() {
                let ctx = TaskContext {
                    class,
                    extraction: &extraction,
                    completed: tasks,
                    terminal: k + 1 == order.len(),
                    config: cfg,
                };
                match execute_task(task, &ctx, graph, gateway) {
                    Ok(done) => tasks.push(done),
                    Err(e) => {
                        if let FailureKind::TaskFailed { attempts, .. } = &e.kind {
                            tasks.push(TaskExecution {
                                task_id: task.id,
                                description: task.description.clone(),
                                mode: ExecutionMode::Llm,
                                operation: None,
                                attempts: attempts.clone(),
                                result: None,
                                warnings: Vec::new(),
                            });
                        }
                        return Err(e);
                    }
                }
            }
            Ok(())
        })?;

        let linked = extraction.linked_ids();
        let context = (class == TaskClass::IdeaHamster && !linked.is_empty())
            .then(|| taskops::idea_context(graph, &linked, cfg.idea_radius).ok())
            .flatten()
            .map(|c| c.digest);
        let tasks = &trace.tasks;
        let reasoning = self.timed(&mut trace.timings, Stage::Reasoning, || {
            reason(tasks, &text, class, gateway, &history, context.as_deref())
        })?;
        trace.reasoning = Some(reasoning.clone());

        let id = trace.id.clone();
        let response = self.timed(&mut trace.timings, Stage::Response, || {
            respond(&reasoning, &intent, &text, gateway, &id)
        })?;
        trace.response = Some(response);
        Ok(())
    }
}
