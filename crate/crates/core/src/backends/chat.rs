//! Blocking client for OpenAI-compatible `/chat/completions` endpoints with
//! image content parts.

use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tracing::{debug, warn};

use crate::error::{Error, Result};
use crate::media::ImageFormat;

fn default_timeout() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    2
}

fn default_in_flight() -> usize {
    4
}

fn default_max_tokens() -> u32 {
    128
}

/// Where and how to reach one model endpoint. Credentials are never stored
/// here, only the name of the environment variable that holds them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model_name: String,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_name: model_name.into(),
            api_key_env: None,
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            max_in_flight: default_in_flight(),
            max_tokens: default_max_tokens(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_url.trim().is_empty() {
            return Err(Error::Config("endpoint base_url is empty".into()));
        }
        if self.model_name.trim().is_empty() {
            return Err(Error::Config("endpoint model_name is empty".into()));
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(Error::Config(format!(
                "endpoint timeout must be positive, got {}",
                self.timeout_secs
            )));
        }
        if self.max_in_flight == 0 {
            return Err(Error::Config("endpoint max_in_flight must be at least 1".into()));
        }
        Ok(())
    }

    pub fn completions_url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }

    fn bearer_token(&self) -> Option<String> {
        let var = self.api_key_env.as_deref()?;
        std::env::var(var).ok().filter(|v| !v.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

/// Minimal HTTP POST abstraction so the wire format can be tested without a
/// network.
pub trait HttpTransport: Send + Sync {
    /// Returns any HTTP reply, 2xx or not. Connection-level failures are
    /// reported as [`Error::Transport`] with no status.
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: Vec<u8>,
        timeout: Duration,
    ) -> Result<HttpReply>;
}

/// The production transport.
#[derive(Debug, Default)]
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new() -> Self {
        Self::default()
    }
}

impl HttpTransport for ReqwestTransport {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: Vec<u8>,
        timeout: Duration,
    ) -> Result<HttpReply> {
        let mut req = self
            .client
            .post(url)
            .timeout(timeout)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body);
        if let Some(token) = bearer {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| Error::Transport {
            status: None,
            body: e.to_string(),
        })?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| Error::Transport {
            status: Some(status),
            body: e.to_string(),
        })?;
        Ok(HttpReply { status, body })
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct InFlightGate {
    limit: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

struct GateGuard<'a>(&'a InFlightGate);

impl InFlightGate {
    fn new(limit: usize) -> Self {
        Self {
            limit,
            active: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> GateGuard<'_> {
        let mut active = self.active.lock().expect("gate lock poisoned");
        while *active >= self.limit {
            active = self.freed.wait(active).expect("gate lock poisoned");
        }
        *active += 1;
        GateGuard(self)
    }
}

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        let mut active = self.0.active.lock().expect("gate lock poisoned");
        *active -= 1;
        self.0.freed.notify_one();
    }
}

/// An encoded image ready to be embedded as a data URL.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedImage {
    pub mime: &'static str,
    pub bytes: Vec<u8>,
}

impl EncodedImage {
    pub fn png(bytes: Vec<u8>) -> Self {
        Self {
            mime: ImageFormat::Png.mime_type(),
            bytes,
        }
    }

    pub fn data_url(&self) -> String {
        format!("data:{};base64,{}", self.mime, BASE64.encode(&self.bytes))
    }
}

/// Chat-completions client for one endpoint.
pub struct ChatClient {
    config: EndpointConfig,
    transport: Arc<dyn HttpTransport>,
    gate: InFlightGate,
    backoff: Duration,
}

impl std::fmt::Debug for ChatClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChatClient")
            .field("config", &self.config)
            .field("backoff", &self.backoff)
            .finish_non_exhaustive()
    }
}

impl ChatClient {
    pub fn new(config: EndpointConfig) -> Result<Self> {
        Self::with_transport(config, Arc::new(ReqwestTransport::new()))
    }

    pub fn with_transport(config: EndpointConfig, transport: Arc<dyn HttpTransport>) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            gate: InFlightGate::new(config.max_in_flight),
            config,
            transport,
            backoff: Duration::from_millis(500),
        })
    }

    /// Base delay between retries; doubled after each failed attempt.
    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    /// Request body for one user turn: the images in order, then the text.
    pub fn request_body(&self, images: &[EncodedImage], text: &str) -> Value {
        let mut content: Vec<Value> = images
            .iter()
            .map(|img| json!({"type": "image_url", "image_url": {"url": img.data_url()}}))
            .collect();
        content.push(json!({"type": "text", "text": text}));
        json!({
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": content}],
            "temperature": 0.0,
            "max_tokens": self.config.max_tokens,
        })
    }

    /// Sends one chat completion and returns the first choice's text.
    ///
    /// Non-2xx replies and connection failures are retried up to
    /// `max_retries` times with exponential backoff. A 2xx reply that does
    /// not parse is a protocol error and is not retried.
    pub fn chat_vision(&self, images: &[EncodedImage], text: &str) -> Result<String> {
        if images.is_empty() && text.is_empty() {
            return Err(Error::Argument("chat request needs an image or text".into()));
        }
        let body = serde_json::to_vec(&self.request_body(images, text))
            .map_err(|e| Error::Protocol(e.to_string()))?;
        let url = self.config.completions_url();
        let bearer = self.config.bearer_token();
        let timeout = Duration::from_secs_f64(self.config.timeout_secs);

        let mut attempt = 0u32;
        loop {
            let outcome = {
                let _slot = self.gate.acquire();
                self.transport
                    .post_json(&url, bearer.as_deref(), body.clone(), timeout)
            };
            let err = match outcome {
                Ok(reply) if (200..300).contains(&reply.status) => {
                    return parse_completion(&reply.body);
                }
                Ok(reply) => Error::Transport {
                    status: Some(reply.status),
                    body: excerpt(&reply.body),
                },
                Err(e) => e,
            };
            if attempt >= self.config.max_retries {
                warn!(%url, attempts = attempt + 1, "giving up: {err}");
                return Err(err);
            }
            let delay = self.backoff.saturating_mul(1 << attempt.min(16));
            debug!(%url, attempt, ?delay, "retrying after: {err}");
            if !delay.is_zero() {
                thread::sleep(delay);
            }
            attempt += 1;
        }
    }
}

fn excerpt(body: &str) -> String {
    const LIMIT: usize = 200;
    match body.char_indices().nth(LIMIT) {
        Some((i, _)) => format!("{}...", &body[..i]),
        None => body.to_string(),
    }
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<Value>,
}

/// Extracts the assistant text of the first choice. Content given as an
/// array of parts has its text parts concatenated.
pub fn parse_completion(body: &str) -> Result<String> {
    let parsed: Completion = serde_json::from_str(body)
        .map_err(|e| Error::Protocol(format!("bad completion body: {e}: {}", excerpt(body))))?;
    let choice = parsed
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| Error::Protocol("completion has no choices".into()))?;
    match choice.message.content {
        Some(Value::String(s)) => Ok(s),
        Some(Value::Array(parts)) => Ok(parts
            .iter()
            .filter_map(|p| p.get("text").and_then(Value::as_str))
            .collect::<Vec<_>>()
            .join("")),
        Some(Value::Null) | None => Ok(String::new()),
        Some(other) => Err(Error::Protocol(format!("unexpected message content {other}"))),
    }
}
