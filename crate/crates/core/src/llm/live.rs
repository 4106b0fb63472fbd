use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use super::{CompletionBackend, CompletionRequest, LlmError};

pub const API_KEY_VAR: &str = "OPENAI_API_KEY";
pub const BASE_URL_VAR: &str = "OPENAI_BASE_URL";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApiStyle {
    #[default]
    Chat,
    Completions,
}

/// Endpoint and limits for the live backend. The API key is read from the
/// environment and is never serialized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LiveConfig {
    pub base_url: String,
    #[serde(skip)]
    pub api_key: Option<String>,
    pub style: ApiStyle,
    pub max_in_flight: usize,
    pub requests_per_minute: u32,
    pub max_retries: u32,
    #[serde(with = "millis")]
    pub initial_backoff: Duration,
    #[serde(with = "millis")]
    pub request_timeout: Duration,
}

impl Default for LiveConfig {
    fn default() -> Self {
        LiveConfig {
            base_url: DEFAULT_BASE_URL.to_string(),
            api_key: None,
            style: ApiStyle::Chat,
            max_in_flight: 4,
            requests_per_minute: 60,
            max_retries: 3,
            initial_backoff: Duration::from_secs(1),
            request_timeout: Duration::from_secs(120),
        }
    }
}

impl LiveConfig {
    /// Fills the key and, when set, the base URL from the environment.
    pub fn with_env(mut self) -> Self {
        if let Ok(key) = std::env::var(API_KEY_VAR) {
            self.api_key = Some(key);
        }
        if let Ok(url) = std::env::var(BASE_URL_VAR) {
            self.base_url = url;
        }
        self
    }

    pub fn from_env() -> Self {
        LiveConfig::default().with_env()
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

struct Limiter {
    max_in_flight: usize,
    per_minute: u32,
    state: Mutex<LimiterState>,
    freed: Condvar,
}

struct LimiterState {
    in_flight: usize,
    started: VecDeque<Instant>,
}

impl Limiter {
    fn acquire(&self) {
        let mut st = self.state.lock().unwrap();
        loop {
            let now = Instant::now();
            while st
                .started
                .front()
                .is_some_and(|t| now.duration_since(*t) >= Duration::from_secs(60))
            {
                st.started.pop_front();
            }
            let slot_free = st.in_flight < self.max_in_flight.max(1);
            let rate_ok = self.per_minute == 0 || st.started.len() < self.per_minute as usize;
            if slot_free && rate_ok {
                st.in_flight += 1;
                st.started.push_back(now);
                return;
            }
            if !rate_ok {
                let oldest = *st.started.front().unwrap();
                let wait = Duration::from_secs(60).saturating_sub(now.duration_since(oldest));
                st = self.freed.wait_timeout(st, wait).unwrap().0;
            } else {
                st = self.freed.wait(st).unwrap();
            }
        }
    }

    fn release(&self) {
        self.state.lock().unwrap().in_flight -= 1;
        self.freed.notify_one();
    }
}

/// OpenAI-compatible HTTP backend.
pub struct LiveBackend {
    config: LiveConfig,
    client: reqwest::blocking::Client,
    limiter: Limiter,
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.request_timeout)
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        let limiter = Limiter {
            max_in_flight: config.max_in_flight,
            per_minute: config.requests_per_minute,
            state: Mutex::new(LimiterState {
                in_flight: 0,
                started: VecDeque::new(),
            }),
            freed: Condvar::new(),
        };
        Ok(LiveBackend {
            config,
            client,
            limiter,
        })
    }

    pub fn config(&self) -> &LiveConfig {
        &self.config
    }

    fn endpoint(&self) -> String {
        let base = self.config.base_url.trim_end_matches('/');
        match self.config.style {
            ApiStyle::Chat => format!("{base}/chat/completions"),
            ApiStyle::Completions => format!("{base}/completions"),
        }
    }

    fn body(&self, req: &CompletionRequest) -> Json {
        let mut body = json!({
            "model": req.model,
            "temperature": req.temperature,
            "top_p": req.top_p,
            "max_tokens": req.max_tokens,
        });
        match self.config.style {
            ApiStyle::Chat => body["messages"] = json!([{ "role": "user", "content": req.prompt }]),
            ApiStyle::Completions => body["prompt"] = json!(req.prompt),
        }
        if let Some(stop) = &req.stop {
            body["stop"] = json!(stop);
        }
        body
    }

    fn attempt(&self, url: &str, body: &Json) -> Result<String, LlmError> {
        let mut call = self
            .client
            .post(url)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.to_string());
        if let Some(key) = &self.config.api_key {
            call = call.bearer_auth(key);
        }
        self.limiter.acquire();
        let sent = call.send();
        self.limiter.release();
        let resp = sent.map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() == 429 {
            let retry_after = resp
                .headers()
                .get(reqwest::header::RETRY_AFTER)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<f64>().ok())
                .map(Duration::from_secs_f64);
            return Err(LlmError::RateLimited { retry_after });
        }
        let text = resp
            .text()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(LlmError::Http {
                status: status.as_u16(),
                body: text,
            });
        }
        let json: Json = serde_json::from_str(&text)
            .map_err(|e| LlmError::Transport(format!("bad JSON: {e}")))?;
        let choice = &json["choices"][0];
        choice["message"]["content"]
            .as_str()
            .or_else(|| choice["text"].as_str())
            .map(str::to_string)
            .ok_or_else(|| LlmError::Transport("response has no choices[0] text".into()))
    }
}

fn retryable(err: &LlmError) -> bool {
    match err {
        LlmError::RateLimited { .. } => true,
        LlmError::Http { status, .. } => *status >= 500,
        _ => false,
    }
}

impl CompletionBackend for LiveBackend {
    fn name(&self) -> &str {
        "live"
    }

    fn complete(&self, req: &CompletionRequest) -> Result<String, LlmError> {
        let url = self.endpoint();
        let body = self.body(req);
        let mut backoff = self.config.initial_backoff;
        let mut retries = 0;
        loop {
            match self.attempt(&url, &body) {
                Err(e) if retryable(&e) && retries < self.config.max_retries => {
                    let wait = match &e {
                        LlmError::RateLimited {
                            retry_after: Some(d),
                        } => (*d).max(backoff),
                        _ => backoff,
                    };
                    log::warn!("live backend: {e}; retrying in {wait:?}");
                    std::thread::sleep(wait);
                    backoff *= 2;
                    retries += 1;
                }
                other => return other,
            }
        }
    }
}
