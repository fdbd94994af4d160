//! Completion backends behind one interface, with request recording for
//! replay and client-side concurrency and token-rate limits.

mod cache;
mod http;
mod limit;
mod oracle;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formats::token_estimate;
use crate::taskgen::{TaskInstance, TaskKind};

pub use cache::{request_key, CacheEntry, CacheWriter, ReplayBackend};
pub use http::{HttpBackend, RetryPolicy};
pub use limit::{InFlightLimit, TokenWindow};
pub use oracle::{corruption_schedule, CorruptOracle, PerfectOracle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub n: usize,
    pub temperature: f64,
    pub max_tokens: usize,
}

impl CompletionRequest {
    /// Temperature 0, default completion count and the task's token reserve.
    pub fn for_task(prompt: String, kind: TaskKind) -> Self {
        CompletionRequest {
            prompt,
            n: kind.default_completions(),
            temperature: 0.0,
            max_tokens: kind.reserve(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport error (status {status:?}): {message}")]
    Transport {
        status: Option<u16>,
        message: String,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("no recorded completion for request {0}")]
    CacheMiss(String),
    #[error("backend returned {got} completions, expected {expected}")]
    WrongCount { expected: usize, got: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ClientError {
    pub fn is_transport(&self) -> bool {
        matches!(self, ClientError::Transport { .. } | ClientError::WrongCount { .. })
    }
}

pub trait Backend: Send + Sync {
    /// Identifier written into result records.
    fn id(&self) -> String;

    /// Model name mixed into the cache key.
    fn model(&self) -> &str;

    fn complete(
        &self,
        req: &CompletionRequest,
        instance: &TaskInstance,
    ) -> Result<Vec<String>, ClientError>;

    /// Whether responses should be appended to the replay cache.
    fn records(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    Http {
        url: String,
        model: String,
        #[serde(default = "default_key_env")]
        api_key_env: Option<String>,
        #[serde(default)]
        retry: RetryPolicy,
    },
    Replay {
        path: PathBuf,
        #[serde(default)]
        model: Option<String>,
    },
    PerfectOracle,
    CorruptOracle {
        rate: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn default_key_env() -> Option<String> {
    Some("OPENAI_API_KEY".to_string())
}

impl BackendConfig {
    pub fn build(&self) -> Result<Box<dyn Backend>, ClientError> {
        Ok(match self {
            BackendConfig::Http {
                url,
                model,
                api_key_env,
                retry,
            } => Box::new(HttpBackend::new(url, model, api_key_env.as_deref(), retry.clone())?),
            BackendConfig::Replay { path, model } => {
                Box::new(ReplayBackend::load(path, model.as_deref())?)
            }
            BackendConfig::PerfectOracle => Box::new(PerfectOracle),
            BackendConfig::CorruptOracle { rate, seed } => Box::new(CorruptOracle::new(*rate, *seed)?),
        })
    }
}

/// Shareable client: enforces the in-flight limit and token rate, checks
/// completion counts and records responses.
pub struct Client {
    backend: Box<dyn Backend>,
    cache: Option<CacheWriter>,
    in_flight: InFlightLimit,
    tokens: Option<TokenWindow>,
}

impl Client {
    pub fn new(backend: Box<dyn Backend>) -> Self {
        Client {
            backend,
            cache: None,
            in_flight: InFlightLimit::new(8),
            tokens: None,
        }
    }

    pub fn with_cache(mut self, cache: CacheWriter) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_in_flight(mut self, limit: usize) -> Self {
        self.in_flight = InFlightLimit::new(limit);
        self
    }

    pub fn with_tokens_per_minute(mut self, budget: usize) -> Self {
        self.tokens = Some(TokenWindow::per_minute(budget));
        self
    }

    pub fn backend_id(&self) -> String {
        self.backend.id()
    }

    pub fn max_in_flight_seen(&self) -> usize {
        self.in_flight.high_water()
    }

    pub fn complete(
        &self,
        req: &CompletionRequest,
        instance: &TaskInstance,
    ) -> Result<Vec<String>, ClientError> {
        if let Some(window) = &self.tokens {
            window.acquire(token_estimate(&req.prompt) + req.n * req.max_tokens);
        }
        let completions = {
            let _permit = self.in_flight.acquire();
            self.backend.complete(req, instance)?
        };
        if completions.len() != req.n {
            return Err(ClientError::WrongCount {
                expected: req.n,
                got: completions.len(),
            });
        }
        if let Some(cache) = self.cache.as_ref().filter(|_| self.backend.records()) {
            cache.append(&CacheEntry {
                key: request_key(req, self.backend.model()),
                model: self.backend.model().to_string(),
                completions: completions.clone(),
            })?;
        }
        Ok(completions)
    }
}
