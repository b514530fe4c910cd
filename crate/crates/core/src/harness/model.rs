//! Prompt-driven agent backed by a model service.

use super::agents::{Agent, EpisodeStart, Reply};
use super::backend::{Backend, BackendError, ChatMessage, ModelRequest};
use super::history::{maintain_history, HistoryEntry, ResultLine};
use super::parse::{parse_tool_calls, Parsed, CALL_FORMAT_REMINDER};
use super::prompt::render_observation;
use crate::tools::{self, ToolSpec};
use crate::world::Observation;

pub const FIRST_USER_MESSAGE: &str = "Begin your workday.";

pub struct ModelAgent {
    label: String,
    backend: Box<dyn Backend>,
    threshold: usize,
    system: String,
    tools: Vec<ToolSpec>,
    history: Vec<HistoryEntry>,
    last_response: Option<String>,
}

impl ModelAgent {
    pub fn new(label: &str, backend: Box<dyn Backend>, threshold: usize) -> Self {
        ModelAgent {
            label: label.to_string(),
            backend,
            threshold,
            system: String::new(),
            tools: tools::catalog(),
            history: Vec::new(),
            last_response: None,
        }
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    pub fn system_prompt(&self) -> &str {
        &self.system
    }

    fn request(&self, extra: Option<String>) -> ModelRequest {
        let mut messages = vec![ChatMessage::new("system", self.system.clone())];
        if self.history.is_empty() {
            messages.push(ChatMessage::new("user", FIRST_USER_MESSAGE));
        }
        for h in &self.history {
            match h {
                HistoryEntry::Exchange {
                    response,
                    observation,
                    ..
                } => {
                    messages.push(ChatMessage::new("assistant", response.clone()));
                    messages.push(ChatMessage::new("user", observation.clone()));
                }
                HistoryEntry::Digest(d) => messages.push(ChatMessage::new("user", d.render())),
            }
        }
        if let Some(e) = extra {
            messages.push(ChatMessage::new("user", e));
        }
        ModelRequest {
            messages,
            tools: self.tools.clone(),
        }
    }

    fn ask(&mut self, extra: Option<String>) -> Result<Reply, BackendError> {
        let text = self.backend.complete(&self.request(extra))?;
        self.last_response = Some(text.clone());
        Ok(match parse_tool_calls(&text) {
            Parsed::Calls { thought, calls } => Reply::Act { thought, calls },
            Parsed::Think { thought } => Reply::Think { thought },
            Parsed::Stop { thought } => Reply::Stop { thought },
            Parsed::Unparseable { reason } => Reply::Unparseable { text, reason },
        })
    }
}

impl Agent for ModelAgent {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn begin(&mut self, start: &EpisodeStart<'_>) {
        self.system = start.system_prompt.to_string();
        self.history.clear();
        self.last_response = None;
    }

    fn next(&mut self, observations: &[Observation]) -> Result<Reply, BackendError> {
        if let Some(response) = self.last_response.take() {
            let observation = if observations.is_empty() {
                "(no tool was called)".to_string()
            } else {
                observations
                    .iter()
                    .map(render_observation)
                    .collect::<Vec<_>>()
                    .join("\n")
            };
            let results = observations
                .iter()
                .filter_map(|o| o.result.as_ref())
                .map(|r| ResultLine {
                    tool: r.tool_name.clone(),
                    ok: r.is_ok(),
                    text: r.payload.clone(),
                })
                .collect();
            let entry = HistoryEntry::Exchange {
                response,
                results,
                observation,
            };
            self.history =
                maintain_history(std::mem::take(&mut self.history), entry, self.threshold);
        }
        self.ask(None)
    }

    fn retry(&mut self, reason: &str) -> Result<Reply, BackendError> {
        self.ask(Some(format!(
            "Your last reply could not be executed: {reason}. {CALL_FORMAT_REMINDER}"
        )))
    }
}
