//! REST facade: chat over the agent pipeline, read-only graph exploration
//! and atomic knowledge updates.

mod config;
mod error;
mod session;

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::routing::{get, post};
use axum::{Json, Router};
use kgpilot_core::graph::{Direction, EdgeRecord, GraphBackend, GraphError, GraphStore, NodeRecord};
use kgpilot_core::pipeline::{
    apply_delta, integrate, AgentResponse, Clock, IntegrationOutcome, NewInfo, Pipeline, PipelineTrace, Stage,
    SystemClock, TaskClass, UpdateDelta, UserQuery,
};
use serde::{Deserialize, Serialize};
use serde_json::Value as JsonValue;
use tower_http::cors::CorsLayer;

pub use config::{build_provider, load_graph, ConfigError, EmbedderConfig, ProviderConfig, ServiceConfig};
pub use error::{ApiError, ERROR_CODES};
pub use session::{SessionGuard, SessionState, Sessions, HISTORY_WINDOW};

/// Node cap for `GET /v1/graph` when no `limit` is given.
pub const DEFAULT_GRAPH_LIMIT: usize = 1000;

/// Shared server state.
pub struct AppState {
    pipeline: Pipeline,
    store: GraphStore,
    sessions: Sessions,
    clock: Arc<dyn Clock>,
    ttl_millis: u64,
    next_session: AtomicU64,
}

impl AppState {
    pub fn new(pipeline: Pipeline, store: GraphStore) -> Self {
        Self {
            pipeline,
            store,
            sessions: Sessions::default(),
            clock: Arc::new(SystemClock),
            ttl_millis: 3_600_000,
            next_session: AtomicU64::new(1),
        }
    }

    pub fn from_config(config: &ServiceConfig) -> Result<Self, ConfigError> {
        let graph = load_graph(config.graph_path.as_deref())?;
        Ok(Self::new(config.pipeline()?, GraphStore::new(graph)).with_ttl_secs(config.session_ttl_secs))
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_ttl_secs(mut self, secs: u64) -> Self {
        self.ttl_millis = secs.saturating_mul(1000);
        self
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    pub fn store(&self) -> &GraphStore {
        &self.store
    }

    pub fn session(&self, id: &str) -> Option<SessionState> {
        self.sessions.get(id)
    }

    pub fn session_count(&self) -> usize {
        self.sessions.len()
    }

    fn now(&self) -> u64 {
        self.clock.now_millis()
    }

    fn evict_idle(&self, now: u64) {
        for id in self.sessions.evict_before(now.saturating_sub(self.ttl_millis)) {
            self.pipeline.clear_history(&id);
        }
    }

    fn chat(&self, guard: &SessionGuard, session_id: &str, message: &str, now: u64) -> Result<ChatReply, ApiError> {
        let query = UserQuery {
            session_id: session_id.to_string(),
            text: message.to_string(),
            received_at: now,
        };
        let graph = self.store.current();
        match self.pipeline.run(&query, &graph) {
            Ok(trace) => {
                let answer = trace
                    .response
                    .clone()
                    .ok_or_else(|| ApiError::internal("run finished without a response").at(Stage::Response))?;
                guard.record(message, &answer.direct_answer);
                let linked_entities = trace.extraction.as_ref().map(|x| x.linked_ids()).unwrap_or_default();
                Ok(ChatReply {
                    session_id: session_id.to_string(),
                    answer,
                    linked_entities,
                    trace,
                })
            }
            Err(failure) => {
                let failure = *failure;
                Err(ApiError::from_run(&failure.error, failure.trace))
            }
        }
    }

    fn update(&self, request: UpdateRequest) -> Result<UpdateReply, ApiError> {
        let report = match request {
            UpdateRequest::Delta(delta) => apply_delta(&self.store, &delta),
            UpdateRequest::Info(info) => integrate(&info, &self.store, self.pipeline.gateway()),
        }
        .map_err(|e| ApiError::from_update(&e))?;
        Ok(UpdateReply {
            version: report.version_after,
            report,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    /// Omitted on the first turn; the reply carries a fresh id.
    #[serde(default)]
    pub session_id: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatReply {
    pub session_id: String,
    pub answer: AgentResponse,
    /// Graph ids of the linked mentions, for highlighting in the client.
    pub linked_entities: Vec<String>,
    pub trace: PipelineTrace,
}

/// Nodes plus edges. For neighbor queries `nodes[i]` is the far end of
/// `edges[i]`, exactly as the graph reports them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgraphPayload {
    pub version: u64,
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateReply {
    pub version: u64,
    pub report: IntegrationOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInfo {
    pub class: u8,
    pub name: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub graph_version: u64,
    pub nodes: usize,
    pub edges: usize,
    pub sessions: usize,
    pub provider: String,
}

/// Body of `POST /v1/graph/update`.
#[derive(Debug, Clone, PartialEq)]
pub enum UpdateRequest {
    /// `{"delta": {...}}`: records and queries applied as given.
    Delta(UpdateDelta),
    /// `{"text": "..."}`, a `text/plain` body, or any other JSON object,
    /// turned into a delta by the update agent.
    Info(NewInfo),
}

impl UpdateRequest {
    /// Parses a request body; `content_type` picks plain text over JSON.
    pub fn parse(body: &[u8], content_type: Option<&str>) -> Result<Self, ApiError> {
        let text = std::str::from_utf8(body).map_err(|_| ApiError::bad_request("body is not UTF-8"))?;
        let empty = || ApiError::new(StatusCode::BAD_REQUEST, "empty_update", "update payload is empty");
        if text.trim().is_empty() {
            return Err(empty());
        }
        if content_type.is_some_and(|c| c.starts_with("text/plain")) {
            return Ok(UpdateRequest::Info(NewInfo::Text(text.trim().to_string())));
        }
        let value: JsonValue =
            serde_json::from_str(text).map_err(|e| ApiError::bad_request(format!("invalid JSON: {e}")))?;
        let JsonValue::Object(mut obj) = value else {
            return Err(ApiError::bad_request("update payload must be a JSON object"));
        };
        if obj.is_empty() {
            return Err(empty());
        }
        if let Some(delta) = obj.remove("delta") {
            let delta: UpdateDelta =
                serde_json::from_value(delta).map_err(|e| ApiError::bad_request(format!("invalid delta: {e}")))?;
            return if delta.is_empty() {
                Err(empty())
            } else {
                Ok(UpdateRequest::Delta(delta))
            };
        }
        if obj.len() == 1 {
            if let Some(JsonValue::String(t)) = obj.get("text") {
                return if t.trim().is_empty() {
                    Err(empty())
                } else {
                    Ok(UpdateRequest::Info(NewInfo::Text(t.trim().to_string())))
                };
            }
        }
        Ok(UpdateRequest::Info(NewInfo::Structured(JsonValue::Object(obj))))
    }
}

fn task_description(class: TaskClass) -> &'static str {
    match class {
        TaskClass::RelationJudgment => "Checks whether a stated relation holds between two concepts.",
        TaskClass::PrerequisitePrediction => "Lists what to learn before a concept, nearest first.",
        TaskClass::PathSearching => "Finds a learning sequence from one concept to another.",
        TaskClass::ConceptClustering => "Groups the concepts of a domain into related clusters.",
        TaskClass::SubgraphCompletion => "Suggests likely missing links around a concept.",
        TaskClass::IdeaHamster => "Proposes project ideas grounded in the graph neighbourhood.",
        TaskClass::Freestyle => "Answers any other question with generated graph queries.",
    }
}

/// The seven task classes with short descriptions.
pub fn task_catalog() -> Vec<TaskInfo> {
    TaskClass::ALL
        .iter()
        .map(|&c| TaskInfo {
            class: c.number(),
            name: c.name().to_string(),
            description: task_description(c).to_string(),
        })
        .collect()
}

type Shared = State<Arc<AppState>>;

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid JSON: {e}")))
}

fn params(q: Result<Query<HashMap<String, String>>, QueryRejection>) -> Result<HashMap<String, String>, ApiError> {
    q.map(|Query(m)| m).map_err(|e| ApiError::bad_request(e.body_text()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

async fn chat(State(app): Shared, body: Bytes) -> Result<Json<ChatReply>, ApiError> {
    let req: ChatRequest = parse_json(&body)?;
    if req.message.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "empty_query", "message is empty").at(Stage::Intent));
    }
    let now = app.now();
    app.evict_idle(now);
    let session_id = req
        .session_id
        .filter(|s| !s.trim().is_empty())
        .unwrap_or_else(|| format!("session-{}", app.next_session.fetch_add(1, Ordering::Relaxed)));
    let guard = app.sessions.acquire(&session_id, now).ok_or_else(|| {
        ApiError::new(
            StatusCode::CONFLICT,
            "session_busy",
            format!("session '{session_id}' is handling another message"),
        )
    })?;
    let reply = blocking(move || app.chat(&guard, &session_id, &req.message, now)).await?;
    tracing::info!(session = %reply.session_id, trace = %reply.trace.id, "chat answered");
    Ok(Json(reply))
}

async fn graph(
    State(app): Shared,
    q: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> Result<Json<SubgraphPayload>, ApiError> {
    let q = params(q)?;
    let limit = match q.get("limit") {
        None => DEFAULT_GRAPH_LIMIT,
        Some(s) => s
            .parse()
            .map_err(|_| ApiError::bad_request(format!("limit '{s}' is not a non-negative integer")))?,
    };
    let label = q.get("label").filter(|l| !l.is_empty());
    let g = app.store.current();
    let nodes: Vec<NodeRecord> = g
        .nodes()
        .filter(|n| label.is_none_or(|l| n.has_label(l)))
        .take(limit)
        .cloned()
        .collect();
    let ids: std::collections::HashSet<&str> = nodes.iter().map(|n| n.id.as_str()).collect();
    let edges = g
        .edges()
        .filter(|e| ids.contains(e.src.as_str()) && ids.contains(e.dst.as_str()))
        .cloned()
        .collect();
    Ok(Json(SubgraphPayload {
        version: g.version(),
        nodes,
        edges,
    }))
}

async fn neighbors(
    State(app): Shared,
    Path(id): Path<String>,
    q: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> Result<Json<SubgraphPayload>, ApiError> {
    let q = params(q)?;
    let direction: Direction = match q.get("direction") {
        None => Direction::Both,
        Some(d) => d
            .parse()
            .map_err(|e: String| ApiError::new(StatusCode::BAD_REQUEST, "bad_direction", e))?,
    };
    let g = app.store.current();
    let pairs = g
        .neighbors(&id, direction, q.get("label").map(String::as_str))
        .map_err(|e| match e {
            GraphError::UnknownId(_) => ApiError::new(StatusCode::NOT_FOUND, "unknown_node", format!("no node '{id}'")),
            other => ApiError::internal(other.to_string()),
        })?;
    let (edges, nodes) = pairs.into_iter().map(|(e, n)| (e.clone(), n.clone())).unzip();
    Ok(Json(SubgraphPayload {
        version: g.version(),
        nodes,
        edges,
    }))
}

async fn update(State(app): Shared, headers: HeaderMap, body: Bytes) -> Result<Json<UpdateReply>, ApiError> {
    let content_type = headers.get(header::CONTENT_TYPE).and_then(|v| v.to_str().ok());
    let request = UpdateRequest::parse(&body, content_type)?;
    let reply = blocking(move || app.update(request)).await?;
    tracing::info!(version = reply.version, "graph updated");
    Ok(Json(reply))
}

async fn tasks() -> Json<Vec<TaskInfo>> {
    Json(task_catalog())
}

async fn health(State(app): Shared) -> Json<Health> {
    let g = app.store.current();
    Json(Health {
        status: "ok".into(),
        graph_version: g.version(),
        nodes: g.node_count(),
        edges: g.edge_count(),
        sessions: app.sessions.len(),
        provider: app.pipeline.gateway().provider_name().to_string(),
    })
}

/// All `/v1` routes over `state`.
pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/chat", post(chat))
        .route("/v1/graph", get(graph))
        .route("/v1/nodes/{id}/neighbors", get(neighbors))
        .route("/v1/graph/update", post(update))
        .route("/v1/tasks", get(tasks))
        .route("/v1/health", get(health))
        .with_state(state)
}

/// Adds CORS for one browser origin.
pub fn with_cors(router: Router, origin: &str) -> Result<Router, String> {
    let origin: HeaderValue = origin.parse().map_err(|_| format!("bad CORS origin '{origin}'"))?;
    Ok(router.layer(
        CorsLayer::new()
            .allow_origin(origin)
            .allow_methods([Method::GET, Method::POST])
            .allow_headers([header::CONTENT_TYPE]),
    ))
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Cors(String),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("server stopped: {0}")]
    Io(#[from] std::io::Error),
}

/// Builds the app from `config` and serves until the process ends.
pub async fn serve(config: &ServiceConfig) -> Result<(), ServeError> {
    let state = Arc::new(AppState::from_config(config)?);
    let mut app = router(state);
    if let Some(origin) = &config.cors_origin {
        app = with_cors(app, origin).map_err(ServeError::Cors)?;
    }
    let listener = tokio::net::TcpListener::bind(&config.bind)
        .await
        .map_err(|source| ServeError::Bind {
            addr: config.bind.clone(),
            source,
        })?;
    tracing::info!(addr = %config.bind, "listening");
    axum::serve(listener, app).await?;
    Ok(())
}
