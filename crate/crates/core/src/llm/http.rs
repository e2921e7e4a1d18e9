//! Chat-completions over HTTP with bearer auth.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use super::{ChatRequest, LlmError, LlmProvider};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    /// Base URL up to and including the API version, e.g. `https://host/v1`.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the key.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
}

pub struct HttpProvider {
    config: HttpConfig,
    key: Option<String>,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(config: HttpConfig) -> Self {
        let key = config.api_key_env.as_deref().and_then(|var| std::env::var(var).ok());
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, key, agent }
    }

    fn body(&self, request: &ChatRequest) -> Json {
        let mut messages = Vec::new();
        if !request.system.is_empty() {
            messages.push(json!({"role": "system", "content": request.system}));
        }
        messages.push(json!({"role": "user", "content": request.user}));
        json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        })
    }
}

impl LlmProvider for HttpProvider {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let mut call = self.agent.post(&url);
        if let Some(key) = &self.key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = call.send_json(self.body(request)).map_err(|e| match e {
            ureq::Error::Timeout(_) => LlmError::Timeout,
            other => LlmError::ProviderUnavailable(other.to_string()),
        })?;
        let status = resp.status().as_u16();
        if status == 429 {
            let retry_after_ms = resp
                .headers()
                .get("retry-after")
                .and_then(|v| v.to_str().ok())
                .and_then(|s| s.trim().parse::<f64>().ok())
                .map(|secs| (secs * 1000.0) as u64);
            return Err(LlmError::RateLimited { retry_after_ms });
        }
        if status == 408 || status == 504 {
            return Err(LlmError::Timeout);
        }
        if !(200..300).contains(&status) {
            return Err(LlmError::ProviderUnavailable(format!("HTTP {status}")));
        }
        let body: Json = resp
            .body_mut()
            .read_json()
            .map_err(|e| LlmError::ProviderUnavailable(e.to_string()))?;
        body.pointer("/choices/0/message/content")
            .and_then(Json::as_str)
            .map(str::to_string)
            .ok_or_else(|| LlmError::ProviderUnavailable("reply has no message content".into()))
    }

    fn name(&self) -> &str {
        &self.config.model
    }
}
