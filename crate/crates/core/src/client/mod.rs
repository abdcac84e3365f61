//! Chat-completion client that asks for one token with its top
//! log-probabilities and turns the answer into a [`RatingDistribution`].
//!
//! Responses are cached by a digest of everything that influences them, so
//! reruns and interrupted batches never pay for the same prompt twice.

mod cache;
pub mod wire;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use cache::{CacheRecord, ResponseCache};
use wire::{ChatRequest, ChatResponse};

use crate::model::{Expression, ModelError, RatingDistribution, ScaleSpec, Variable};
use crate::prompts::{build_prompt, PromptText};

pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
pub const DEFAULT_MODEL: &str = "gpt-4o-2024-08-06";
pub const DEFAULT_API_KEY_ENV: &str = "OPENAI_API_KEY";

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("transport error after {attempts} attempt(s){}: {message}", status.map(|s| format!(" (last status {s})")).unwrap_or_default())]
    Transport {
        status: Option<u16>,
        attempts: u32,
        message: String,
    },
    #[error("malformed response: {0}")]
    Protocol(String),
    #[error("endpoint does not support log-probabilities: {0}")]
    Capability(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("prompt: {0}")]
    Prompt(String),
    #[error("batch failed: all {failed} of {total} items failed (first error: {first})")]
    BatchFailed {
        failed: usize,
        total: usize,
        first: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay before the second attempt; doubles on each further attempt.
    pub backoff_base: Duration,
    pub max_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            backoff_base: Duration::from_millis(500),
            max_backoff: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    /// Delay after failed attempt number `attempt` (1-based).
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 2u32.saturating_pow(attempt.saturating_sub(1));
        self.backoff_base
            .saturating_mul(factor)
            .min(self.max_backoff)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub temperature: f64,
    pub top_logprobs: u32,
    pub max_output_tokens: u32,
    /// Environment variable holding the bearer token. An unset variable means
    /// no authorization header.
    pub api_key_env: String,
    pub concurrency_limit: usize,
    pub retry: RetryPolicy,
    pub request_timeout: Duration,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            endpoint_url: DEFAULT_ENDPOINT.into(),
            model_name: DEFAULT_MODEL.into(),
            temperature: 0.0,
            top_logprobs: 20,
            max_output_tokens: 1,
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            concurrency_limit: 8,
            retry: RetryPolicy::default(),
            request_timeout: Duration::from_secs(60),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ClientError> {
        let bad = |m: String| Err(ClientError::Config(m));
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return bad(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            ));
        }
        if self.max_output_tokens < 1 {
            return bad("max_output_tokens must be >= 1".into());
        }
        if self.concurrency_limit < 1 {
            return bad("concurrency_limit must be >= 1".into());
        }
        if self.retry.max_attempts < 1 {
            return bad("retry.max_attempts must be >= 1".into());
        }
        if self.endpoint_url.trim().is_empty() {
            return bad("endpoint_url is empty".into());
        }
        Ok(())
    }

    pub fn validate_for(&self, scale: &ScaleSpec) -> Result<(), ClientError> {
        self.validate()?;
        if (self.top_logprobs as usize) < scale.cardinality() {
            return Err(ClientError::Config(format!(
                "top_logprobs {} is smaller than the {}-point scale",
                self.top_logprobs,
                scale.cardinality()
            )));
        }
        Ok(())
    }
}

/// Content digest of everything that determines a response.
pub fn request_digest(config: &ModelConfig, prompt: &str) -> String {
    #[derive(Serialize)]
    struct Key<'a> {
        model: &'a str,
        prompt: &'a str,
        temperature: f64,
        top_logprobs: u32,
        max_tokens: u32,
    }
    let key = Key {
        model: &config.model_name,
        prompt,
        temperature: config.temperature,
        top_logprobs: config.top_logprobs,
        max_tokens: config.max_output_tokens,
    };
    let bytes = serde_json::to_vec(&key).expect("digest key serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// First generated token's top alternatives, as returned by the endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawCompletion {
    pub prompt_digest: String,
    /// `(token, natural-log probability)`
    pub top_tokens: Vec<(String, f64)>,
    pub chosen_text: String,
}

/// Positive log-probabilities this small are rounding noise and read as 0.
const LOGPROB_SLACK: f64 = 1e-6;

/// Pulls the first-token alternatives out of a response body.
pub fn parse_completion(
    body: &[u8],
    digest: &str,
    top_logprobs: u32,
) -> Result<RawCompletion, ClientError> {
    let resp: ChatResponse = serde_json::from_slice(body)
        .map_err(|e| ClientError::Protocol(format!("cannot decode body: {e}")))?;
    let choice = resp
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| ClientError::Protocol("response has no choices".into()))?;
    let chosen_text = choice.message.content.unwrap_or_default();
    let first = choice
        .logprobs
        .and_then(|l| l.content)
        .and_then(|c| c.into_iter().next())
        .ok_or_else(|| ClientError::Capability("choices[0].logprobs.content is missing".into()))?;
    let mut top_tokens: Vec<(String, f64)> = if first.top_logprobs.is_empty() {
        vec![(first.token, first.logprob)]
    } else {
        first
            .top_logprobs
            .into_iter()
            .map(|t| (t.token, t.logprob))
            .collect()
    };
    top_tokens.truncate(top_logprobs.max(1) as usize);
    for (token, lp) in &mut top_tokens {
        if lp.is_nan() || *lp > LOGPROB_SLACK {
            return Err(ClientError::Protocol(format!(
                "token {token:?} has log-probability {lp}"
            )));
        }
        *lp = lp.min(0.0);
    }
    Ok(RawCompletion {
        prompt_digest: digest.to_string(),
        top_tokens,
        chosen_text,
    })
}

/// Maps first-token alternatives onto scale points.
///
/// A token counts for point `p` when, after trimming surrounding whitespace
/// and one trailing period, it is exactly the numeral `p`. Variants of the
/// same numeral are summed. The residual is everything else: listed tokens
/// that are not an in-scale numeral plus the tail beyond the top-k list,
/// i.e. `1 - in-scale mass`. The in-scale mass is not renormalized here.
pub fn extract_token_distribution(
    raw: &RawCompletion,
    scale: &ScaleSpec,
) -> Result<RatingDistribution, ModelError> {
    let mut mass: BTreeMap<u8, f64> = BTreeMap::new();
    for (token, lp) in &raw.top_tokens {
        let t = token.trim();
        let t = t.strip_suffix('.').unwrap_or(t);
        if let [d @ b'0'..=b'9'] = t.as_bytes() {
            let point = d - b'0';
            if scale.contains(point) {
                *mass.entry(point).or_insert(0.0) += lp.exp();
            }
        }
    }
    let in_scale: f64 = mass.values().sum();
    if in_scale > 1.0 {
        // Summed rounding noise from the endpoint.
        mass.values_mut().for_each(|v| *v /= in_scale);
    }
    let residual = (1.0 - mass.values().sum::<f64>()).max(0.0);
    RatingDistribution::new(scale, mass, residual)
}

/// One expression's outcome within a batch.
#[derive(Debug)]
pub struct BatchItem {
    pub expression: Expression,
    pub outcome: Result<RatingDistribution, ClientError>,
}

pub struct LlmClient {
    config: ModelConfig,
    http: reqwest::Client,
    cache: Arc<ResponseCache>,
    api_key: Option<String>,
    network_requests: AtomicUsize,
}

impl LlmClient {
    /// Reads the API key from the configured environment variable.
    pub fn new(config: ModelConfig, cache: Arc<ResponseCache>) -> Result<Self, ClientError> {
        let api_key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.is_empty());
        Self::with_api_key(config, cache, api_key)
    }

    pub fn with_api_key(
        config: ModelConfig,
        cache: Arc<ResponseCache>,
        api_key: Option<String>,
    ) -> Result<Self, ClientError> {
        config.validate()?;
        let http = reqwest::Client::builder()
            .timeout(config.request_timeout)
            .build()
            .map_err(|e| ClientError::Config(format!("http client: {e}")))?;
        Ok(LlmClient {
            config,
            http,
            cache,
            api_key,
            network_requests: AtomicUsize::new(0),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    /// HTTP requests issued so far, retries included.
    pub fn network_requests(&self) -> usize {
        self.network_requests.load(Ordering::Relaxed)
    }

    /// Sends one prompt, or answers from the cache when the same request has
    /// been made before. 429, 5xx and network failures are retried with
    /// exponential backoff.
    pub async fn request_rating(&self, prompt: &PromptText) -> Result<RawCompletion, ClientError> {
        let digest = request_digest(&self.config, &prompt.text);
        if let Some(hit) = self.cache.get(&digest) {
            return Ok(hit);
        }
        let body = ChatRequest::rating(
            &self.config.model_name,
            &prompt.text,
            self.config.temperature,
            self.config.top_logprobs,
            self.config.max_output_tokens,
        );
        let policy = &self.config.retry;
        let mut last_status = None;
        let mut last_message = String::new();
        for attempt in 1..=policy.max_attempts {
            if attempt > 1 {
                tokio::time::sleep(policy.delay(attempt - 1)).await;
            }
            self.network_requests.fetch_add(1, Ordering::Relaxed);
            let mut req = self.http.post(&self.config.endpoint_url).json(&body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            let resp = match req.send().await {
                Ok(r) => r,
                Err(e) => {
                    // Connection resets and timeouts are worth another try.
                    last_status = e.status().map(|s| s.as_u16());
                    last_message = e.to_string();
                    continue;
                }
            };
            let status = resp.status();
            let bytes = match resp.bytes().await {
                Ok(b) => b,
                Err(e) => {
                    last_status = Some(status.as_u16());
                    last_message = e.to_string();
                    continue;
                }
            };
            if status.is_success() {
                let completion = parse_completion(&bytes, &digest, self.config.top_logprobs)?;
                self.cache
                    .insert(&self.config.model_name, &prompt.text, &completion)?;
                return Ok(completion);
            }
            last_status = Some(status.as_u16());
            last_message = String::from_utf8_lossy(&bytes).chars().take(300).collect();
            if !(status.as_u16() == 429 || status.is_server_error()) {
                return Err(ClientError::Transport {
                    status: last_status,
                    attempts: attempt,
                    message: last_message,
                });
            }
        }
        Err(ClientError::Transport {
            status: last_status,
            attempts: policy.max_attempts,
            message: last_message,
        })
    }

    /// Rates every expression with at most `concurrency_limit` requests in
    /// flight. Results come back in input order; failed items are reported
    /// in place. Only a batch in which every item failed is an error.
    pub async fn batch_estimate(
        &self,
        expressions: &[Expression],
        variable: Variable,
        scale: &ScaleSpec,
    ) -> Result<Vec<BatchItem>, ClientError> {
        self.config.validate_for(scale)?;
        if expressions.is_empty() {
            return Err(ClientError::Config("empty expression list".into()));
        }
        let items: Vec<BatchItem> = stream::iter(expressions.iter().cloned())
            .map(|expression| async move {
                let outcome = self.rate_one(&expression, variable, scale).await;
                BatchItem {
                    expression,
                    outcome,
                }
            })
            .buffered(self.config.concurrency_limit)
            .collect()
            .await;
        let failed = items.iter().filter(|i| i.outcome.is_err()).count();
        if failed == items.len() {
            let first = items
                .iter()
                .find_map(|i| i.outcome.as_ref().err())
                .map(ToString::to_string)
                .unwrap_or_default();
            return Err(ClientError::BatchFailed {
                failed,
                total: items.len(),
                first,
            });
        }
        Ok(items)
    }

    async fn rate_one(
        &self,
        expression: &Expression,
        variable: Variable,
        scale: &ScaleSpec,
    ) -> Result<RatingDistribution, ClientError> {
        let prompt = build_prompt(variable, expression, scale)
            .map_err(|e| ClientError::Prompt(e.to_string()))?;
        let raw = self.request_rating(&prompt).await?;
        extract_token_distribution(&raw, scale).map_err(|e| ClientError::Protocol(e.to_string()))
    }
}
