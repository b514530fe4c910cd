//! The environment state and its transition function.
//!
//! All mutation of a [`WorldState`] goes through [`WorldState::apply`]: the
//! tool call is validated and executed by the tool gateway, the clock moves
//! forward by the tool's time cost, and every pending event whose trigger time
//! has been reached fires in `(trigger_time, seq)` order before the
//! observation is returned. [`transition`] is the pure form that works on a
//! copy.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::canonical;
use crate::error::{ClockError, DecodeError};
use crate::metatask::Custodian;
use crate::npc::NpcState;
use crate::time::{Interval, SimTime};
use crate::tools::{self, ToolResult, ToolSpec};

pub const STATE_FORMAT: &str = "worksim.state";
pub const STATE_VERSION: u32 = 1;

/// Canonical display prefix of simulated cloud-disk paths.
pub const CLOUD_DISK: &str = "CloudDisk://";

pub type TaskId = String;
pub type ClueId = String;
pub type NpcId = String;
pub type MeetingId = String;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub clock: SimTime,
    pub workday: Interval,
    pub agent: AgentState,
    pub npcs: BTreeMap<NpcId, NpcState>,
    pub files: BTreeMap<String, FileEntry>,
    pub datastore: BTreeMap<String, Table>,
    pub calendar: Vec<Meeting>,
    pub pending_events: Vec<EnvEvent>,
    pub event_log: Vec<EnvEvent>,
    pub revealed_clues: BTreeSet<ClueId>,
    pub message_log: Vec<Message>,
    pub tasks: BTreeMap<TaskId, TaskBrief>,
    pub released_tasks: BTreeSet<TaskId>,
    /// Tasks published while the agent attends a meeting: meeting id -> tasks.
    pub meeting_reveals: BTreeMap<MeetingId, Vec<TaskId>>,
    pub clue_index: BTreeMap<ClueId, Custodian>,
    pub submissions: BTreeMap<TaskId, Vec<Submission>>,
    pub next_event_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Persona {
    pub name: String,
    pub email: String,
    pub role: String,
    pub company: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub persona: Persona,
    pub inbox: Vec<Message>,
    pub current_activity: Activity,
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", content = "id", rename_all = "snake_case")]
pub enum Activity {
    Idle,
    InMeeting(MeetingId),
    Working(TaskId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub content: String,
    pub read_only: bool,
}

pub type Record = BTreeMap<String, String>;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub rows: BTreeMap<String, Record>,
}

impl Table {
    /// Tables whose name starts with `_` back other tools and are not queryable.
    pub fn is_system(name: &str) -> bool {
        name.starts_with('_')
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meeting {
    pub meeting_id: MeetingId,
    pub title: String,
    pub organizer: Option<NpcId>,
    pub participants: Vec<String>,
    pub room: String,
    pub interval: Interval,
    pub task_id: Option<TaskId>,
    pub attendance: Vec<AttendanceSpan>,
}

impl Meeting {
    pub fn attended_minutes(&self) -> i64 {
        self.attendance
            .iter()
            .map(|span| {
                let leave = span.leave.unwrap_or(self.interval.end);
                span.join.minutes_until(leave).max(0)
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttendanceSpan {
    pub join: SimTime,
    pub leave: Option<SimTime>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub from: String,
    pub to: String,
    pub body: String,
    pub sent_at: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub at: SimTime,
    pub content: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Priority {
    Normal,
    TimeCritical,
}

/// Agent-facing view of a task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskBrief {
    pub task_id: TaskId,
    pub description: String,
    pub deadline: Option<SimTime>,
    pub priority: Priority,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvEvent {
    pub seq: u64,
    pub trigger_time: SimTime,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    MeetingStart { meeting_id: MeetingId },
    MeetingEnd { meeting_id: MeetingId },
    TaskRelease { task_id: TaskId },
    MessageArrival { message: Message },
    DeadlinePassed { task_id: TaskId },
}

impl EventBody {
    pub fn kind(&self) -> &'static str {
        match self {
            EventBody::MeetingStart { .. } => "meeting_start",
            EventBody::MeetingEnd { .. } => "meeting_end",
            EventBody::TaskRelease { .. } => "task_release",
            EventBody::MessageArrival { .. } => "message_arrival",
            EventBody::DeadlinePassed { .. } => "deadline_passed",
        }
    }
}

/// Something the agent is told about outside a tool's own output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notice {
    pub at: SimTime,
    pub kind: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contact {
    pub name: String,
    pub email: String,
    pub role: String,
    pub department: String,
}

/// What the agent sees after a transition (or at session start).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub clock: SimTime,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persona: Option<Persona>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workday: Option<Interval>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tasks: Vec<TaskBrief>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tools: Vec<ToolSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contacts: Vec<Contact>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub databases: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<ToolResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notices: Vec<Notice>,
}

impl Observation {
    pub fn at(clock: SimTime) -> Self {
        Observation {
            clock,
            persona: None,
            workday: None,
            tasks: Vec::new(),
            tools: Vec::new(),
            contacts: Vec::new(),
            databases: Vec::new(),
            result: None,
            notices: Vec::new(),
        }
    }
}

/// A tool invocation as produced by an agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub name: String,
    #[serde(default)]
    pub arguments: BTreeMap<String, Value>,
}

impl ToolCall {
    pub fn new(name: &str) -> Self {
        ToolCall {
            id: None,
            name: name.to_string(),
            arguments: BTreeMap::new(),
        }
    }

    pub fn arg(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.arguments.insert(key.to_string(), value.into());
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }
}

/// A tool call as executed: the call plus the clock reading it was issued at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub call_id: String,
    pub tool_name: String,
    pub arguments: BTreeMap<String, Value>,
    pub issued_at: SimTime,
}

impl WorldState {
    pub fn contacts(&self) -> Vec<Contact> {
        self.npcs
            .values()
            .map(|n| Contact {
                name: n.profile.name.clone(),
                email: n.profile.email.clone(),
                role: n.profile.role.clone(),
                department: n.profile.department.clone(),
            })
            .collect()
    }

    /// Queryable table names.
    pub fn databases(&self) -> Vec<String> {
        self.datastore
            .keys()
            .filter(|k| !Table::is_system(k))
            .cloned()
            .collect()
    }

    pub fn released_briefs(&self) -> Vec<TaskBrief> {
        self.tasks
            .values()
            .filter(|t| self.released_tasks.contains(&t.task_id))
            .cloned()
            .collect()
    }

    pub fn meeting(&self, id: &str) -> Option<&Meeting> {
        self.calendar.iter().find(|m| m.meeting_id == id)
    }

    pub fn meeting_mut(&mut self, id: &str) -> Option<&mut Meeting> {
        self.calendar.iter_mut().find(|m| m.meeting_id == id)
    }

    /// Queues an event; the queue stays sorted by `(trigger_time, seq)`.
    pub fn push_event(&mut self, trigger_time: SimTime, body: EventBody) {
        let seq = self.next_event_seq;
        self.next_event_seq += 1;
        let ev = EnvEvent {
            seq,
            trigger_time,
            body,
        };
        let pos = self
            .pending_events
            .partition_point(|e| (e.trigger_time, e.seq) <= (ev.trigger_time, ev.seq));
        self.pending_events.insert(pos, ev);
    }

    pub fn reveal(&mut self, clue: &str) {
        if self.clue_index.contains_key(clue) {
            self.revealed_clues.insert(clue.to_string());
        }
    }

    /// Moves the clock to `until`, firing every event in `(clock, until]`
    /// (and any still due at the current clock) in order.
    pub fn advance_clock(&mut self, until: SimTime) -> Result<Vec<Notice>, ClockError> {
        if until < self.clock {
            return Err(ClockError::Backwards {
                now: self.clock.to_string(),
                requested: until.to_string(),
            });
        }
        let mut notices = Vec::new();
        while let Some(first) = self.pending_events.first() {
            if first.trigger_time > until {
                break;
            }
            let ev = self.pending_events.remove(0);
            notices.extend(self.fire(&ev));
            self.event_log.push(ev);
        }
        self.clock = until;
        Ok(notices)
    }

    fn fire(&mut self, ev: &EnvEvent) -> Vec<Notice> {
        let at = ev.trigger_time;
        let note = |kind: &str, text: String| Notice {
            at,
            kind: kind.to_string(),
            text,
        };
        match &ev.body {
            EventBody::MeetingStart { meeting_id } => match self.meeting(meeting_id) {
                Some(m) => vec![note(
                    "meeting_start",
                    format!(
                        "Meeting '{}' ({}) has started in {}. It runs {}.",
                        m.title, m.meeting_id, m.room, m.interval
                    ),
                )],
                None => Vec::new(),
            },
            EventBody::MeetingEnd { meeting_id } => {
                let mut out = Vec::new();
                if self.agent.current_activity == Activity::InMeeting(meeting_id.clone()) {
                    self.agent.current_activity = Activity::Idle;
                }
                if let Some(m) = self.meeting_mut(meeting_id) {
                    for span in m.attendance.iter_mut() {
                        if span.leave.is_none() {
                            span.leave = Some(at);
                        }
                    }
                    out.push(note(
                        "meeting_end",
                        format!("Meeting '{}' ({}) has ended.", m.title, m.meeting_id),
                    ));
                }
                out
            }
            EventBody::TaskRelease { task_id } => self.release_task(task_id, at, None),
            EventBody::MessageArrival { message } => {
                self.agent.inbox.push(message.clone());
                self.message_log.push(message.clone());
                vec![note(
                    "message_arrival",
                    format!("New message from {}: {}", message.from, message.body),
                )]
            }
            EventBody::DeadlinePassed { task_id } => vec![note(
                "deadline_passed",
                format!("The deadline for task {task_id} has passed."),
            )],
        }
    }

    /// Publishes a task to the agent. `via` names who announced it, if anyone.
    pub fn release_task(&mut self, task_id: &str, at: SimTime, via: Option<&str>) -> Vec<Notice> {
        if !self.released_tasks.insert(task_id.to_string()) {
            return Vec::new();
        }
        let Some(brief) = self.tasks.get(task_id) else {
            return Vec::new();
        };
        let text = match via {
            Some(who) => format!(
                "{who} assigns you a new task {}: {}",
                brief.task_id, brief.description
            ),
            None => format!("New task {}: {}", brief.task_id, brief.description),
        };
        vec![Notice {
            at,
            kind: "task_release".into(),
            text,
        }]
    }

    /// Executes one tool call in place and returns the observation.
    pub fn apply(&mut self, call: &ToolCall) -> Observation {
        let issued_at = self.clock;
        let call_id = call.id.clone().unwrap_or_else(|| "call".to_string());
        let before = self.released_tasks.clone();
        let outcome = tools::execute(self, call);
        let target = outcome
            .advance_to
            .unwrap_or_else(|| issued_at.plus_minutes(outcome.time_cost));
        let mut notices = outcome.notices;
        let target = target.max(self.clock);
        notices.extend(self.advance_clock(target).unwrap_or_default());
        let new_tasks = self
            .released_briefs()
            .into_iter()
            .filter(|t| !before.contains(&t.task_id))
            .collect();
        let result = ToolResult {
            call_id,
            tool_name: call.name.clone(),
            status: outcome.status,
            payload: outcome.payload,
            effect: outcome.effect,
            issued_at,
            clock_after: self.clock,
        };
        Observation {
            result: Some(result),
            notices,
            tasks: new_tasks,
            ..Observation::at(self.clock)
        }
    }

    pub fn to_snapshot(&self) -> Vec<u8> {
        serialize_state(self)
    }
}

/// Pure transition: returns the successor state and observation, leaving
/// `state` untouched.
pub fn transition(state: &WorldState, call: &ToolCall) -> (WorldState, Observation) {
    let mut next = state.clone();
    let obs = next.apply(call);
    (next, obs)
}

/// Pure clock advance.
pub fn advance_clock(state: &WorldState, until: SimTime) -> Result<WorldState, ClockError> {
    let mut next = state.clone();
    next.advance_clock(until)?;
    Ok(next)
}

pub fn serialize_state(state: &WorldState) -> Vec<u8> {
    canonical::encode_envelope(STATE_FORMAT, STATE_VERSION, state)
}

pub fn deserialize_state(bytes: &[u8]) -> Result<WorldState, DecodeError> {
    canonical::decode_envelope(bytes, STATE_FORMAT, STATE_VERSION)
}

/// Canonical `CloudDisk://dir/file` form of a path given as
/// `CloudDisk://x`, `CloudDisk:x`, `CloudDisk:/x`, `/x` or `x`.
pub fn normalize_path(path: &str) -> String {
    let trimmed = path.trim();
    let rest = trimmed
        .strip_prefix("CloudDisk:")
        .or_else(|| trimmed.strip_prefix("clouddisk:"))
        .unwrap_or(trimmed);
    let rest: String = rest.split_whitespace().collect();
    let rest = rest.trim_start_matches('/').trim_end_matches('/');
    format!("{CLOUD_DISK}{rest}")
}

/// Returns the tool specs, used by initial observations.
pub fn tool_catalog() -> Vec<ToolSpec> {
    tools::catalog()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_forms_normalize_to_one_key() {
        let want = "CloudDisk://ads_strategy/ads_strategy_handbook.md";
        for p in [
            "CloudDisk:ads_strategy/ads_strategy_handbook.md",
            "CloudDisk://ads_strategy/ads_strategy_handbook.md",
            "CloudDisk:ads_strategy/ ads_strategy_handbook.md",
            "/ads_strategy/ads_strategy_handbook.md",
            "ads_strategy/ads_strategy_handbook.md",
        ] {
            assert_eq!(normalize_path(p), want, "{p}");
        }
        assert_eq!(normalize_path("CloudDisk://"), "CloudDisk://");
    }
}
