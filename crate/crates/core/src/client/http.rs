//! OpenAI-compatible text completion endpoint.

use std::time::Duration;

use reqwest::blocking::Client as HttpClient;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::{Backend, ClientError, CompletionRequest};
use crate::taskgen::TaskInstance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
    pub timeout_secs: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 6,
            base_delay_ms: 1000,
            max_delay_ms: 60_000,
            timeout_secs: 300,
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        let ms = self
            .base_delay_ms
            .saturating_mul(1u64 << attempt.min(20))
            .min(self.max_delay_ms);
        Duration::from_millis(ms)
    }
}

#[derive(Serialize)]
struct Body<'a> {
    model: &'a str,
    prompt: &'a str,
    n: usize,
    temperature: f64,
    max_tokens: usize,
}

#[derive(Deserialize)]
struct Reply {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    #[serde(default)]
    index: usize,
    text: String,
}

pub struct HttpBackend {
    url: String,
    model: String,
    api_key: Option<String>,
    retry: RetryPolicy,
    http: HttpClient,
}

impl HttpBackend {
    /// `api_key_env` names the environment variable holding the bearer
    /// token; if it is named but unset, that is a configuration error.
    pub fn new(
        url: &str,
        model: &str,
        api_key_env: Option<&str>,
        retry: RetryPolicy,
    ) -> Result<Self, ClientError> {
        let api_key = match api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                ClientError::Config(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        let http = HttpClient::builder()
            .timeout(Duration::from_secs(retry.timeout_secs))
            .build()
            .map_err(|e| ClientError::Config(e.to_string()))?;
        Ok(HttpBackend {
            url: url.to_string(),
            model: model.to_string(),
            api_key,
            retry,
            http,
        })
    }

    fn attempt(&self, body: &Body) -> Result<Vec<String>, (bool, ClientError, Option<Duration>)> {
        let mut request = self.http.post(&self.url).json(body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| {
            let status = e.status().map(|s| s.as_u16());
            (true, ClientError::Transport { status, message: e.to_string() }, None)
        })?;
        let status = response.status();
        if status.is_success() {
            let reply: Reply = response.json().map_err(|e| {
                let err = ClientError::Transport {
                    status: Some(status.as_u16()),
                    message: format!("malformed response: {e}"),
                };
                (false, err, None)
            })?;
            let mut choices = reply.choices;
            choices.sort_by_key(|c| c.index);
            return Ok(choices.into_iter().map(|c| c.text).collect());
        }
        let retry_after = response
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let text = response.text().unwrap_or_default();
        if status == StatusCode::UNAUTHORIZED || status == StatusCode::FORBIDDEN {
            let err = ClientError::Config(format!("authentication failed ({status}): {text}"));
            return Err((false, err, None));
        }
        let retryable = status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error();
        let err = ClientError::Transport {
            status: Some(status.as_u16()),
            message: text,
        };
        Err((retryable, err, retry_after))
    }
}

impl Backend for HttpBackend {
    fn id(&self) -> String {
        format!("http:{}", self.model)
    }

    fn model(&self) -> &str {
        &self.model
    }

    fn complete(&self, req: &CompletionRequest, _: &TaskInstance) -> Result<Vec<String>, ClientError> {
        let body = Body {
            model: &self.model,
            prompt: &req.prompt,
            n: req.n,
            temperature: req.temperature,
            max_tokens: req.max_tokens,
        };
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Ok(texts) => return Ok(texts),
                Err((true, err, retry_after)) if attempt < self.retry.max_retries => {
                    let wait = retry_after
                        .map(|d| d.min(Duration::from_millis(self.retry.max_delay_ms)))
                        .unwrap_or_else(|| self.retry.delay(attempt));
                    tracing::warn!(attempt, ?wait, "retrying after {err}");
                    std::thread::sleep(wait);
                    attempt += 1;
                }
                Err((_, err, _)) => return Err(err),
            }
        }
    }
}
