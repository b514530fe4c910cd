//! Ordered step log of one episode.

use serde::{Deserialize, Serialize};

use crate::time::SimTime;
use crate::tools::{Effect, ToolResult};
use crate::world::{Notice, ToolCall};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub call: ToolCall,
    pub result: ToolResult,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notices: Vec<Notice>,
}

/// One model turn: a thought and zero or more tool calls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub index: usize,
    pub clock: SimTime,
    #[serde(default)]
    pub thought: String,
    #[serde(default)]
    pub actions: Vec<ActionRecord>,
    /// The turn produced no parseable call block.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unparseable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Guidance {
    pub tier: u8,
    pub text: String,
    pub injected_at: SimTime,
    /// Number of steps taken before the hint arrived.
    pub after_step: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub steps: u64,
    pub tool_calls: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    #[serde(default)]
    pub hints: Vec<Guidance>,
    pub counters: Counters,
}

impl Trajectory {
    pub fn push(&mut self, mut step: Step) {
        step.index = self.steps.len();
        self.counters.steps += 1;
        self.counters.tool_calls += step.actions.len() as u64;
        self.steps.push(step);
    }

    pub fn push_hint(&mut self, hint: Guidance) {
        self.hints.push(hint);
    }

    pub fn actions(&self) -> impl Iterator<Item = &ActionRecord> {
        self.steps.iter().flat_map(|s| s.actions.iter())
    }

    /// Effects of successful calls, in order.
    pub fn effects(&self) -> impl Iterator<Item = &Effect> {
        self.actions().filter_map(|a| a.result.effect.as_ref())
    }

    pub fn recount(&self) -> Counters {
        Counters {
            steps: self.steps.len() as u64,
            tool_calls: self.actions().count() as u64,
        }
    }

    pub fn calls(&self) -> Vec<ToolCall> {
        self.actions().map(|a| a.call.clone()).collect()
    }
}
