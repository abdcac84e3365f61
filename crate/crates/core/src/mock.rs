//! A simulated chat-completion endpoint with a known ground truth.
//!
//! Each (expression, variable, seed) gets a latent rating from a SHA-256
//! digest, and responses put a Gaussian-shaped profile of probability over the
//! scale-point numerals around it. Nothing depends on arrival order or wall
//! time, so two servers with the same seed are interchangeable.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use sha2::{Digest, Sha256};
use tokio::sync::oneshot;

use crate::client::wire::{
    ChatRequest, ChatResponse, Choice, ChoiceLogprobs, ResponseMessage, TokenLogprob, TopLogprob,
};
use crate::client::{request_digest, ModelConfig, RawCompletion};
use crate::model::{Expression, ScaleSpec, Variable};
use crate::prompts::{parse_prompt, PromptText};

pub const MOCK_MODEL: &str = "mock-norms";
pub const CHAT_PATH: &str = "/v1/chat/completions";

/// Log-probabilities below this are dropped from responses; their
/// probability underflows to zero anyway.
const MIN_LOGPROB: f64 = -700.0;

#[derive(Debug, thiserror::Error)]
pub enum MockError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("unparseable prompt: {0}")]
    Protocol(String),
    #[error("sharpness must be positive and finite, got {0}")]
    Sharpness(f64),
    #[error("error rate must lie in [0, 1], got {0}")]
    ErrorRate(f64),
    #[error("server: {0}")]
    Server(String),
}

fn digest_unit(parts: &[&[u8]]) -> f64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_be_bytes());
        h.update(p);
    }
    let d = h.finalize();
    let mut first = [0u8; 8];
    first.copy_from_slice(&d[..8]);
    // Top 53 bits as a uniform value in [0, 1).
    (u64::from_be_bytes(first) >> 11) as f64 / (1u64 << 53) as f64
}

/// Ground-truth rating for an expression, uniform over `[min, max]` across
/// keys and fixed for a given seed.
pub fn latent_rating(
    expression: &Expression,
    variable: Variable,
    seed: u64,
    scale: &ScaleSpec,
) -> f64 {
    let u = digest_unit(&[
        b"latent",
        variable.as_str().as_bytes(),
        &seed.to_be_bytes(),
        expression.key().as_bytes(),
    ]);
    let (lo, hi) = (f64::from(scale.min), f64::from(scale.max));
    (lo + u * (hi - lo)).clamp(lo, hi)
}

/// Scale-point numerals with log-probabilities proportional to
/// `exp(-sharpness * (p - center)^2)`, most probable first.
pub fn token_profile(center: f64, min: u8, max: u8, sharpness: f64) -> Vec<(String, f64)> {
    let logits: Vec<(u8, f64)> = (min..=max)
        .map(|p| (p, -sharpness * (f64::from(p) - center).powi(2)))
        .collect();
    let top = logits.iter().map(|l| l.1).fold(f64::NEG_INFINITY, f64::max);
    let log_z = top + logits.iter().map(|l| (l.1 - top).exp()).sum::<f64>().ln();
    let mut tokens: Vec<(u8, f64)> = logits
        .into_iter()
        .map(|(p, l)| (p, (l - log_z).min(0.0)))
        .filter(|(_, lp)| *lp >= MIN_LOGPROB)
        .collect();
    tokens.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    tokens
        .into_iter()
        .map(|(p, lp)| (p.to_string(), lp))
        .collect()
}

/// The completion the mock would return for `prompt` under the default
/// client configuration with the mock model name.
pub fn simulate_response(
    prompt: &PromptText,
    seed: u64,
    sharpness: f64,
) -> Result<RawCompletion, MockError> {
    let config = ModelConfig {
        model_name: MOCK_MODEL.into(),
        ..ModelConfig::default()
    };
    let digest = request_digest(&config, &prompt.text);
    simulate_for(&prompt.text, seed, sharpness, config.top_logprobs, &digest)
}

fn simulate_for(
    prompt: &str,
    seed: u64,
    sharpness: f64,
    top_logprobs: u32,
    digest: &str,
) -> Result<RawCompletion, MockError> {
    if !(sharpness > 0.0 && sharpness.is_finite()) {
        return Err(MockError::Sharpness(sharpness));
    }
    let parsed = parse_prompt(prompt)
        .ok_or_else(|| MockError::Protocol("no expression slot found".into()))?;
    let expression =
        Expression::new(parsed.expression).map_err(|e| MockError::Protocol(e.to_string()))?;
    let mut scale = crate::model::default_scale(parsed.variable);
    scale.min = parsed.min;
    scale.max = parsed.max;
    let center = latent_rating(&expression, parsed.variable, seed, &scale);
    let mut top_tokens = token_profile(center, parsed.min, parsed.max, sharpness);
    top_tokens.truncate(top_logprobs.max(1) as usize);
    let chosen_text = top_tokens[0].0.clone();
    Ok(RawCompletion {
        prompt_digest: digest.to_string(),
        top_tokens,
        chosen_text,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockConfig {
    pub seed: u64,
    pub sharpness: f64,
    /// Share of requests answered with 503, decided per (request, attempt)
    /// from the seed.
    pub error_rate: f64,
}

impl Default for MockConfig {
    fn default() -> Self {
        MockConfig {
            seed: 0,
            sharpness: 2.0,
            error_rate: 0.0,
        }
    }
}

impl MockConfig {
    fn validate(&self) -> Result<(), MockError> {
        if !(self.sharpness > 0.0 && self.sharpness.is_finite()) {
            return Err(MockError::Sharpness(self.sharpness));
        }
        if !(0.0..=1.0).contains(&self.error_rate) {
            return Err(MockError::ErrorRate(self.error_rate));
        }
        Ok(())
    }
}

struct ServerState {
    config: MockConfig,
    requests: AtomicUsize,
    attempts: Mutex<HashMap<String, u64>>,
}

fn error_body(status: StatusCode, message: String) -> Response {
    (
        status,
        Json(serde_json::json!({"error": {"message": message, "type": "mock_error"}})),
    )
        .into_response()
}

async fn chat(State(state): State<Arc<ServerState>>, body: axum::body::Bytes) -> Response {
    state.requests.fetch_add(1, Ordering::Relaxed);
    let req: ChatRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error_body(StatusCode::BAD_REQUEST, format!("bad request body: {e}")),
    };
    let Some(prompt) = req.messages.iter().rev().find(|m| m.role == "user") else {
        return error_body(StatusCode::BAD_REQUEST, "no user message".into());
    };
    let top_logprobs = req.top_logprobs.unwrap_or(20);
    let digest_config = ModelConfig {
        model_name: req.model.clone(),
        temperature: req.temperature,
        top_logprobs,
        max_output_tokens: req.max_tokens.unwrap_or(1),
        ..ModelConfig::default()
    };
    let digest = request_digest(&digest_config, &prompt.content);

    if state.config.error_rate > 0.0 {
        let attempt = {
            let mut seen = state.attempts.lock().expect("attempt map");
            let n = seen.entry(digest.clone()).or_insert(0);
            *n += 1;
            *n
        };
        let u = digest_unit(&[
            b"fault",
            &state.config.seed.to_be_bytes(),
            digest.as_bytes(),
            &attempt.to_be_bytes(),
        ]);
        if u < state.config.error_rate {
            return error_body(StatusCode::SERVICE_UNAVAILABLE, "injected fault".into());
        }
    }

    let completion = match simulate_for(
        &prompt.content,
        state.config.seed,
        state.config.sharpness,
        top_logprobs,
        &digest,
    ) {
        Ok(c) => c,
        Err(e) => return error_body(StatusCode::BAD_REQUEST, e.to_string()),
    };
    Json(to_response(&req.model, &completion)).into_response()
}

/// Wraps a completion in a chat-completion response body. Log-probabilities
/// are always included, whether or not the request asked for them.
pub fn to_response(model: &str, completion: &RawCompletion) -> ChatResponse {
    let top: Vec<TopLogprob> = completion
        .top_tokens
        .iter()
        .map(|(t, lp)| TopLogprob {
            token: t.clone(),
            logprob: *lp,
            bytes: Some(t.as_bytes().to_vec()),
        })
        .collect();
    let (token, logprob) = completion.top_tokens[0].clone();
    ChatResponse {
        id: format!(
            "mock-{}",
            &completion.prompt_digest[..16.min(completion.prompt_digest.len())]
        ),
        object: "chat.completion".into(),
        created: 0,
        model: model.to_string(),
        choices: vec![Choice {
            index: 0,
            message: ResponseMessage {
                role: "assistant".into(),
                content: Some(completion.chosen_text.clone()),
            },
            logprobs: Some(ChoiceLogprobs {
                content: Some(vec![TokenLogprob {
                    bytes: Some(token.as_bytes().to_vec()),
                    token,
                    logprob,
                    top_logprobs: top,
                }]),
            }),
            finish_reason: Some("length".into()),
        }],
    }
}

pub fn router(config: MockConfig) -> Router {
    router_with_state(Arc::new(ServerState {
        config,
        requests: AtomicUsize::new(0),
        attempts: Mutex::new(HashMap::new()),
    }))
}

fn router_with_state(state: Arc<ServerState>) -> Router {
    Router::new()
        .route(CHAT_PATH, post(chat))
        .route("/chat/completions", post(chat))
        .with_state(state)
}

/// A server running on the caller's tokio runtime.
pub struct MockServer {
    addr: SocketAddr,
    state: Arc<ServerState>,
    stop: Option<oneshot::Sender<()>>,
    task: Option<tokio::task::JoinHandle<()>>,
}

impl MockServer {
    /// Binds `addr` (port 0 picks a free port) and starts serving.
    pub async fn start(addr: SocketAddr, config: MockConfig) -> Result<Self, MockError> {
        config.validate()?;
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|source| MockError::Bind { addr, source })?;
        let addr = listener
            .local_addr()
            .map_err(|source| MockError::Bind { addr, source })?;
        let state = Arc::new(ServerState {
            config,
            requests: AtomicUsize::new(0),
            attempts: Mutex::new(HashMap::new()),
        });
        let app = router_with_state(state.clone());
        let (stop, stopped) = oneshot::channel::<()>();
        let task = tokio::spawn(async move {
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = stopped.await;
                })
                .await;
        });
        Ok(MockServer {
            addr,
            state,
            stop: Some(stop),
            task: Some(task),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Full chat-completions URL.
    pub fn url(&self) -> String {
        format!("http://{}{CHAT_PATH}", self.addr)
    }

    /// Requests received so far, failed ones included.
    pub fn request_count(&self) -> usize {
        self.state.requests.load(Ordering::Relaxed)
    }

    pub async fn shutdown(mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(task) = self.task.take() {
            let _ = task.await;
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
    }
}

/// Serves on `port` until Ctrl-C, printing the endpoint URL on stdout.
pub async fn serve(host: &str, port: u16, config: MockConfig) -> Result<(), MockError> {
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| MockError::Server(format!("bad address {host}:{port}: {e}")))?;
    let server = MockServer::start(addr, config).await?;
    println!("{}", server.url());
    tokio::signal::ctrl_c()
        .await
        .map_err(|e| MockError::Server(e.to_string()))?;
    server.shutdown().await;
    Ok(())
}

/// A server on its own runtime thread, for synchronous callers.
pub struct BackgroundMock {
    url: String,
    addr: SocketAddr,
    state: Arc<ServerState>,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl BackgroundMock {
    pub fn start(config: MockConfig) -> Result<Self, MockError> {
        let (ready_tx, ready_rx) = std::sync::mpsc::channel();
        let (stop, stopped) = oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            let rt = match tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
            {
                Ok(rt) => rt,
                Err(e) => {
                    let _ = ready_tx.send(Err(MockError::Server(e.to_string())));
                    return;
                }
            };
            rt.block_on(async move {
                match MockServer::start(([127, 0, 0, 1], 0).into(), config).await {
                    Ok(server) => {
                        let _ = ready_tx.send(Ok((server.addr, server.state.clone())));
                        let _ = stopped.await;
                        server.shutdown().await;
                    }
                    Err(e) => {
                        let _ = ready_tx.send(Err(e));
                    }
                }
            });
        });
        let (addr, state) = ready_rx
            .recv()
            .map_err(|_| MockError::Server("mock thread exited early".into()))??;
        Ok(BackgroundMock {
            url: format!("http://{addr}{CHAT_PATH}"),
            addr,
            state,
            stop: Some(stop),
            thread: Some(thread),
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn request_count(&self) -> usize {
        self.state.requests.load(Ordering::Relaxed)
    }
}

impl Drop for BackgroundMock {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
