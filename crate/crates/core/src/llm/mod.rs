//! Completion backends behind one trait: live HTTP, cassette replay and a
//! scripted queue, plus a recording decorator.

mod cassette;
mod live;
mod registry;
mod scripted;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cassette::{Cassette, CassetteEntry, RecordingBackend, ReplayBackend};
pub use live::{ApiStyle, LiveBackend, LiveConfig};
pub use registry::{BackendConfig, BackendFactory, BackendRegistry};
pub use scripted::ScriptedBackend;

pub const DEFAULT_MODEL: &str = "gpt-4";
pub const DEFAULT_MAX_TOKENS: u32 = 2048;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub model: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<Vec<String>>,
}

impl CompletionRequest {
    /// Deterministic sampling: temperature 0, top_p 1.
    pub fn new(prompt: impl Into<String>, model: impl Into<String>) -> Self {
        CompletionRequest {
            prompt: prompt.into(),
            model: model.into(),
            temperature: 0.0,
            top_p: 1.0,
            max_tokens: DEFAULT_MAX_TOKENS,
            stop: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("rate limited (retry after {retry_after:?})")]
    RateLimited { retry_after: Option<Duration> },
    #[error("no recorded response for fingerprint {0}")]
    ReplayMiss(String),
    #[error("scripted response queue is empty")]
    QueueEmpty,
    #[error("cassette error: {0}")]
    Cassette(String),
    #[error("backend configuration: {0}")]
    Config(String),
}

/// A single-shot text completion service. Implementations must tolerate
/// concurrent calls.
pub trait CompletionBackend: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, req: &CompletionRequest) -> Result<String, LlmError>;
}

/// Prompt with trailing whitespace removed from every line.
pub fn normalize_prompt(prompt: &str) -> String {
    prompt
        .split('\n')
        .map(str::trim_end)
        .collect::<Vec<_>>()
        .join("\n")
}

/// SHA-256 over the normalized prompt and every sampling parameter.
pub fn fingerprint(req: &CompletionRequest) -> String {
    #[derive(Serialize)]
    struct Key<'a> {
        prompt: String,
        model: &'a str,
        temperature: String,
        top_p: String,
        max_tokens: u32,
        stop: &'a Option<Vec<String>>,
    }
    let key = Key {
        prompt: normalize_prompt(&req.prompt),
        model: &req.model,
        // textual form keeps 0 and 0.0 apart from float noise
        temperature: format!("{:?}", req.temperature),
        top_p: format!("{:?}", req.top_p),
        max_tokens: req.max_tokens,
        stop: &req.stop,
    };
    let bytes = serde_json::to_vec(&key).expect("plain struct serializes");
    hex::encode(Sha256::digest(bytes))
}
