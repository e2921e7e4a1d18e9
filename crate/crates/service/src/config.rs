//! Server configuration and the pieces it wires together.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use kgpilot_core::embedding::{Embedder, HashEmbedder, HttpEmbedder};
use kgpilot_core::graph::{import_str, InterchangeError, KnowledgeGraph};
use kgpilot_core::llm::{FnProvider, Gateway, HttpConfig, LlmError, LlmProvider, ScriptedProvider};
use kgpilot_core::pipeline::{Pipeline, PipelineConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad config file {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("bad graph file {path}: {source}")]
    Graph {
        path: PathBuf,
        #[source]
        source: InterchangeError,
    },
    #[error("bad script file {path}: {message}")]
    Script { path: PathBuf, message: String },
}

/// Which language model answers agent prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderConfig {
    /// Replays a hash-keyed script file; unknown prompts fail.
    Scripted {
        script: PathBuf,
    },
    Http(HttpConfig),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbedderConfig {
    /// Local feature hashing, no network.
    #[default]
    Hash,
    Http {
        #[serde(flatten)]
        http: HttpConfig,
        dims: usize,
    },
}

impl EmbedderConfig {
    pub fn build(&self) -> Arc<dyn Embedder<f64>> {
        match self {
            EmbedderConfig::Hash => Arc::new(HashEmbedder::default()),
            EmbedderConfig::Http { http, dims } => Arc::new(HttpEmbedder::new(http.clone(), *dims)),
        }
    }
}

/// Builds the provider. Without one, every call reports the provider as
/// unavailable, which still leaves graph exploration usable.
pub fn build_provider(config: Option<&ProviderConfig>) -> Result<Arc<dyn LlmProvider>, ConfigError> {
    Ok(match config {
        None => Arc::new(FnProvider::new("none", |_| {
            Err(LlmError::ProviderUnavailable("no provider configured".into()))
        })),
        Some(ProviderConfig::Scripted { script }) => {
            let text = read(script)?;
            let p = ScriptedProvider::from_json_str(&text).map_err(|e| ConfigError::Script {
                path: script.clone(),
                message: e.to_string(),
            })?;
            Arc::new(p)
        }
        Some(ProviderConfig::Http(http)) => Arc::new(kgpilot_core::llm::HttpProvider::new(http.clone())),
    })
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads an interchange file, or starts empty when `path` is `None`.
pub fn load_graph(path: Option<&Path>) -> Result<KnowledgeGraph, ConfigError> {
    match path {
        None => Ok(KnowledgeGraph::new()),
        Some(p) => import_str(&read(p)?).map_err(|source| ConfigError::Graph {
            path: p.to_path_buf(),
            source,
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub bind: String,
    /// Browser origin allowed by CORS; `None` sends no CORS headers.
    pub cors_origin: Option<String>,
    pub graph_path: Option<PathBuf>,
    pub provider: Option<ProviderConfig>,
    pub embedder: EmbedderConfig,
    pub pipeline: PipelineConfig,
    pub session_ttl_secs: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            cors_origin: None,
            graph_path: None,
            provider: None,
            embedder: EmbedderConfig::Hash,
            pipeline: PipelineConfig::default(),
            session_ttl_secs: 3600,
        }
    }
}

impl ServiceConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml_str(&read(path)?).map_err(|message| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn pipeline(&self) -> Result<Pipeline, ConfigError> {
        let provider = build_provider(self.provider.as_ref())?;
        Ok(Pipeline::new(
            Gateway::new(provider),
            self.embedder.build(),
            self.pipeline.clone(),
        ))
    }
}
