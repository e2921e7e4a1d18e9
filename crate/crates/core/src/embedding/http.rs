//! Remote embeddings over the common `/embeddings` HTTP shape.

use std::time::Duration;

use serde_json::{json, Value as Json};

use super::{EmbedError, Embedder, EmbeddingVector};
use crate::llm::HttpConfig;
use crate::scalar::Scalar;

pub struct HttpEmbedder {
    config: HttpConfig,
    dims: usize,
    key: Option<String>,
    agent: ureq::Agent,
}

impl HttpEmbedder {
    pub fn new(config: HttpConfig, dims: usize) -> Self {
        let key = config.api_key_env.as_deref().and_then(|var| std::env::var(var).ok());
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs.max(1))))
            .build()
            .into();
        Self {
            config,
            dims,
            key,
            agent,
        }
    }
}

impl<T: Scalar> Embedder<T> for HttpEmbedder {
    fn dims(&self) -> usize {
        self.dims
    }

    fn fingerprint(&self) -> String {
        format!("http-{}-{}", self.config.model, self.dims)
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector<T>, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let url = format!("{}/embeddings", self.config.base_url.trim_end_matches('/'));
        let mut call = self.agent.post(&url);
        if let Some(key) = &self.key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let body: Json = call
            .send_json(json!({"model": self.config.model, "input": text}))
            .and_then(|mut r| r.body_mut().read_json())
            .map_err(|e| EmbedError::Provider(e.to_string()))?;
        let values = body
            .pointer("/data/0/embedding")
            .and_then(Json::as_array)
            .ok_or_else(|| EmbedError::Provider("reply has no embedding".into()))?
            .iter()
            .map(|x| x.as_f64().map(T::lit))
            .collect::<Option<Vec<T>>>()
            .ok_or_else(|| EmbedError::Provider("embedding is not numeric".into()))?;
        if values.len() != self.dims {
            return Err(EmbedError::DimMismatch {
                left: values.len(),
                right: self.dims,
            });
        }
        EmbeddingVector::new(values)
    }
}
