//! The single boundary to chat models: providers, a call log, templated
//! prompts and validated JSON replies with bounded re-prompting.

#[cfg(feature = "http")]
mod http;
mod structured;
pub mod templates;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};
use sha2::{Digest, Sha256};

#[cfg(feature = "http")]
pub use http::{HttpConfig, HttpProvider};
pub use structured::{coerce_f64, coerce_int, extract_json_object, string_list, FieldKind, FieldSpec, Validator};
pub use templates::{render_template, template, Template, TemplateError, TEMPLATES};

pub const DEFAULT_RETRY_LIMIT: usize = 3;
pub const DEFAULT_MAX_TOKENS: u32 = 1024;

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system: String,
    pub user: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub tag: String,
}

impl ChatRequest {
    pub fn new(tag: impl Into<String>, system: impl Into<String>, user: impl Into<String>) -> Self {
        Self {
            system: system.into(),
            user: user.into(),
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
            tag: tag.into(),
        }
    }

    fn check(&self) -> Result<(), LlmError> {
        if self.user.trim().is_empty() {
            return Err(LlmError::InvalidRequest("user prompt is empty".into()));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_tokens must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(LlmError::InvalidRequest(format!(
                "temperature {} outside [0, 1]",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// One round of a structured exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub prompt: String,
    pub reply: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LlmError {
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("provider timed out")]
    Timeout,
    #[error("rate limited, retry after {retry_after_ms:?} ms")]
    RateLimited { retry_after_ms: Option<u64> },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("reply failed validation after {} attempts: {last_error}", attempts.len())]
    SchemaViolation { attempts: Vec<Attempt>, last_error: String },
}

/// Anything that turns a chat request into text.
pub trait LlmProvider: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError>;

    fn name(&self) -> &str;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum ScriptEntry {
    One(String),
    Seq(Vec<String>),
}

/// Replies keyed by the SHA-256 of the user prompt. A key may map to a list
/// of replies handed out in order; the last one repeats once exhausted.
#[derive(Debug, Default)]
pub struct ScriptedProvider {
    script: BTreeMap<String, ScriptEntry>,
    cursor: Mutex<HashMap<String, usize>>,
}

impl ScriptedProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reply_to(mut self, user_prompt: &str, reply: impl Into<String>) -> Self {
        self.insert(user_prompt, reply);
        self
    }

    pub fn reply_seq(mut self, user_prompt: &str, replies: Vec<String>) -> Self {
        self.script.insert(sha256_hex(user_prompt), ScriptEntry::Seq(replies));
        self
    }

    pub fn insert(&mut self, user_prompt: &str, reply: impl Into<String>) {
        self.script
            .insert(sha256_hex(user_prompt), ScriptEntry::One(reply.into()));
    }

    pub fn len(&self) -> usize {
        self.script.len()
    }

    pub fn is_empty(&self) -> bool {
        self.script.is_empty()
    }

    /// Rewinds every reply sequence to its start.
    pub fn reset(&self) {
        self.cursor.lock().clear();
    }

    pub fn from_json_str(text: &str) -> Result<Self, serde_json::Error> {
        Ok(Self {
            script: serde_json::from_str(text)?,
            cursor: Mutex::default(),
        })
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text).map_err(std::io::Error::other)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.script).expect("script serializes")
    }
}

impl LlmProvider for ScriptedProvider {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let key = sha256_hex(&request.user);
        match self.script.get(&key) {
            None => Err(LlmError::ProviderUnavailable("no script entry".into())),
            Some(ScriptEntry::One(r)) => Ok(r.clone()),
            Some(ScriptEntry::Seq(rs)) if rs.is_empty() => Err(LlmError::ProviderUnavailable("no script entry".into())),
            Some(ScriptEntry::Seq(rs)) => {
                let mut cur = self.cursor.lock();
                let i = cur.entry(key).or_insert(0);
                let reply = rs[(*i).min(rs.len() - 1)].clone();
                *i += 1;
                Ok(reply)
            }
        }
    }

    fn name(&self) -> &str {
        "scripted"
    }
}

type ReplyFn = dyn Fn(&ChatRequest) -> Result<String, LlmError> + Send + Sync;

/// Wraps a closure; handy for fakes that compute replies from the prompt.
pub struct FnProvider {
    name: String,
    f: Box<ReplyFn>,
}

impl FnProvider {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(&ChatRequest) -> Result<String, LlmError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            f: Box::new(f),
        }
    }
}

impl LlmProvider for FnProvider {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        (self.f)(request)
    }

    fn name(&self) -> &str {
        &self.name
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub session: String,
    pub seq: u64,
    pub tag: String,
    pub provider: String,
    pub request: ChatRequest,
    pub reply: Result<String, String>,
}

/// Append-only record of every provider call. A child log also forwards
/// each record to its parent.
#[derive(Debug, Default)]
pub struct CallLog {
    next: AtomicU64,
    records: Mutex<Vec<CallRecord>>,
    parent: Option<Arc<CallLog>>,
}

impl CallLog {
    fn push(&self, session: &str, provider: &str, request: &ChatRequest, reply: &Result<String, LlmError>) {
        if let Some(p) = &self.parent {
            p.push(session, provider, request, reply);
        }
        let mut records = self.records.lock();
        let seq = self.next.fetch_add(1, Ordering::SeqCst);
        records.push(CallRecord {
            session: session.to_string(),
            seq,
            tag: request.tag.clone(),
            provider: provider.to_string(),
            request: request.clone(),
            reply: reply.clone().map_err(|e| e.to_string()),
        });
    }

    pub fn records(&self) -> Vec<CallRecord> {
        self.records.lock().clone()
    }

    pub fn for_session(&self, session: &str) -> Vec<CallRecord> {
        self.records
            .lock()
            .iter()
            .filter(|r| r.session == session)
            .cloned()
            .collect()
    }

    pub fn len(&self) -> usize {
        self.records.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-agent request settings.
#[derive(Clone)]
pub struct AgentConfig {
    pub temperature: f64,
    pub max_tokens: u32,
    pub provider: Option<Arc<dyn LlmProvider>>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
            provider: None,
        }
    }
}

/// A validated structured reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredReply {
    pub raw: String,
    pub value: Map<String, Json>,
    pub attempts: usize,
}

impl StructuredReply {
    pub fn text(&self, key: &str) -> Option<&str> {
        self.value.get(key).and_then(Json::as_str)
    }
}

/// Appends a validation error to the original prompt for the next attempt.
pub fn retry_prompt(original: &str, error: &str) -> String {
    format!(
        "{original}\n\nYour previous reply could not be used: {error}.\nReply again with only the valid JSON object."
    )
}

/// Retry wording for replies that are not JSON.
pub fn retry_prompt_text(original: &str, error: &str) -> String {
    format!("{original}\n\nYour previous reply could not be used: {error}.\nReply again in the requested format.")
}

/// Shared entry point for every agent. Cloning is cheap and clones share the
/// call log; `with_session` scopes log records to one conversation.
#[derive(Clone)]
pub struct Gateway {
    provider: Arc<dyn LlmProvider>,
    agents: Arc<HashMap<String, AgentConfig>>,
    retry_limit: usize,
    session: String,
    log: Arc<CallLog>,
}

impl Gateway {
    pub fn new(provider: Arc<dyn LlmProvider>) -> Self {
        Self {
            provider,
            agents: Arc::default(),
            retry_limit: DEFAULT_RETRY_LIMIT,
            session: "default".into(),
            log: Arc::default(),
        }
    }

    pub fn with_agent(mut self, tag: &str, config: AgentConfig) -> Self {
        Arc::make_mut(&mut self.agents).insert(tag.to_string(), config);
        self
    }

    pub fn with_retry_limit(mut self, limit: usize) -> Self {
        self.retry_limit = limit.max(1);
        self
    }

    pub fn with_session(&self, session: impl Into<String>) -> Self {
        let mut g = self.clone();
        g.session = session.into();
        g
    }

    /// A clone whose calls land in a fresh log (and still reach this one).
    pub fn scoped(&self, session: impl Into<String>) -> Self {
        let mut g = self.with_session(session);
        g.log = Arc::new(CallLog {
            parent: Some(self.log.clone()),
            ..CallLog::default()
        });
        g
    }

    pub fn retry_limit(&self) -> usize {
        self.retry_limit
    }

    pub fn log(&self) -> &Arc<CallLog> {
        &self.log
    }

    pub fn provider_name(&self) -> &str {
        self.provider.name()
    }

    /// Builds a request using the agent's configured settings.
    pub fn request(&self, tag: &str, system: &str, user: &str) -> ChatRequest {
        let cfg = self.agents.get(tag).cloned().unwrap_or_default();
        ChatRequest {
            system: system.to_string(),
            user: user.to_string(),
            temperature: cfg.temperature,
            max_tokens: cfg.max_tokens,
            tag: tag.to_string(),
        }
    }

    fn provider_for(&self, tag: &str) -> &Arc<dyn LlmProvider> {
        self.agents
            .get(tag)
            .and_then(|c| c.provider.as_ref())
            .unwrap_or(&self.provider)
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        request.check()?;
        let provider = self.provider_for(&request.tag);
        let reply = provider.complete(request);
        self.log.push(&self.session, provider.name(), request, &reply);
        reply
    }

    pub fn complete_structured(&self, request: &ChatRequest, spec: &FieldSpec) -> Result<StructuredReply, LlmError> {
        let (value, raw, attempts) = self.retrying(request, retry_prompt, |raw| match extract_json_object(raw) {
            None => Err("no JSON object found in the reply".to_string()),
            Some(obj) => spec.validate(&obj).map(|_| obj),
        })?;
        Ok(StructuredReply { raw, value, attempts })
    }

    /// Free-form replies: `parse` either accepts the text or names the
    /// problem, which is fed back for another attempt.
    pub fn complete_parsed<T>(
        &self,
        request: &ChatRequest,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<T, LlmError> {
        self.retrying(request, retry_prompt_text, parse).map(|(v, _, _)| v)
    }

    fn retrying<T>(
        &self,
        request: &ChatRequest,
        reprompt: fn(&str, &str) -> String,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<(T, String, usize), LlmError> {
        let mut attempts = Vec::new();
        let mut req = request.clone();
        loop {
            let raw = self.complete(&req)?;
            match parse(&raw) {
                Ok(value) => return Ok((value, raw, attempts.len() + 1)),
                Err(error) => {
                    attempts.push(Attempt {
                        prompt: req.user.clone(),
                        reply: raw,
                        error: error.clone(),
                    });
                    if attempts.len() >= self.retry_limit {
                        return Err(LlmError::SchemaViolation {
                            attempts,
                            last_error: error,
                        });
                    }
                    req.user = reprompt(&request.user, &error);
                }
            }
        }
    }
}
