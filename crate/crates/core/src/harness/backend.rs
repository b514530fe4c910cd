//! Model-service backends.

use std::collections::{BTreeMap, VecDeque};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use super::parse::{render_call, STOP};
use crate::tools::ToolSpec;
use crate::world::ToolCall;

pub const ENDPOINT_VAR: &str = "WORKSIM_MODEL_ENDPOINT";
pub const KEY_VAR: &str = "WORKSIM_MODEL_KEY";
pub const MODEL_VAR: &str = "WORKSIM_MODEL_NAME";
pub const DEFAULT_RETRIES: u32 = 3;
pub const MOCK_MISS: &str = "<think>No scripted reply for this prompt.</think>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: &str, content: impl Into<String>) -> Self {
        ChatMessage {
            role: role.to_string(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRequest {
    pub messages: Vec<ChatMessage>,
    pub tools: Vec<ToolSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("model service unreachable after {attempts} attempts: {last}")]
    Transport { attempts: u32, last: String },
    #[error("model service returned an unusable response: {0}")]
    Protocol(String),
}

pub trait Backend: Send {
    fn complete(&mut self, request: &ModelRequest) -> Result<String, BackendError>;
}

/// Replays a fixed list of responses, then stops.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    responses: VecDeque<String>,
}

impl ScriptedBackend {
    pub fn new(responses: impl IntoIterator<Item = String>) -> Self {
        ScriptedBackend {
            responses: responses.into_iter().collect(),
        }
    }

    pub fn from_calls(calls: &[ToolCall]) -> Self {
        Self::new(calls.iter().map(render_call))
    }
}

impl Backend for ScriptedBackend {
    fn complete(&mut self, _: &ModelRequest) -> Result<String, BackendError> {
        Ok(self
            .responses
            .pop_front()
            .unwrap_or_else(|| STOP.to_string()))
    }
}

/// Looks the last message up in a table; misses yield a think-only turn.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MockBackend {
    pub table: BTreeMap<String, String>,
}

impl Backend for MockBackend {
    fn complete(&mut self, request: &ModelRequest) -> Result<String, BackendError> {
        let key = request
            .messages
            .last()
            .map(|m| m.content.as_str())
            .unwrap_or_default();
        Ok(self
            .table
            .get(key)
            .cloned()
            .unwrap_or_else(|| MOCK_MISS.to_string()))
    }
}

/// Chat-completion client against an OpenAI-style endpoint.
pub struct RemoteBackend {
    pub endpoint: String,
    pub key: Option<String>,
    pub model: String,
    pub retries: u32,
    pub backoff: Duration,
    client: reqwest::blocking::Client,
}

impl RemoteBackend {
    pub fn new(endpoint: &str, key: Option<String>, model: &str) -> Self {
        RemoteBackend {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            key,
            model: model.to_string(),
            retries: DEFAULT_RETRIES,
            backoff: Duration::from_millis(200),
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(120))
                .build()
                .expect("http client"),
        }
    }

    /// Reads endpoint, key and model name from the environment.
    pub fn from_env() -> Option<Self> {
        let endpoint = std::env::var(ENDPOINT_VAR).ok()?;
        let model = std::env::var(MODEL_VAR).unwrap_or_else(|_| "default".to_string());
        Some(Self::new(&endpoint, std::env::var(KEY_VAR).ok(), &model))
    }

    fn once(&self, request: &ModelRequest) -> Result<String, String> {
        let body = json!({"model": self.model, "messages": request.messages, "temperature": 0});
        let mut req = self
            .client
            .post(format!("{}/chat/completions", self.endpoint))
            .json(&body);
        if let Some(k) = &self.key {
            req = req.bearer_auth(k);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status();
        if !status.is_success() {
            return Err(format!("HTTP {status}"));
        }
        let v: serde_json::Value = resp.json().map_err(|e| e.to_string())?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| "missing choices[0].message.content".to_string())
    }
}

impl Backend for RemoteBackend {
    fn complete(&mut self, request: &ModelRequest) -> Result<String, BackendError> {
        let mut last = String::new();
        for attempt in 0..self.retries.max(1) {
            match self.once(request) {
                Ok(text) => return Ok(text),
                Err(e) => last = e,
            }
            if attempt + 1 < self.retries {
                std::thread::sleep(self.backoff * (attempt + 1));
            }
        }
        Err(BackendError::Transport {
            attempts: self.retries.max(1),
            last,
        })
    }
}
