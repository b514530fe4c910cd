//! Agent interface and the scripted reference agents.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde_json::Value;

use super::backend::BackendError;
use super::prompt::ExperienceRecord;
use crate::metatask::knapsack::{best_channels, greedy_by_ratio, Channel};
use crate::metatask::pools;
use crate::metatask::rules::strategy::ads_plan_text;
use crate::rng::Stream;
use crate::scenario::Scenario;
use crate::time::{Interval, SimTime};
use crate::tools::{self, ParamType, ToolSpec};
use crate::verifier::checkpoint::Predicate;
use crate::world::{Contact, Observation, TaskId, ToolCall};

#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    Act {
        thought: String,
        calls: Vec<ToolCall>,
    },
    Think {
        thought: String,
    },
    Stop {
        thought: String,
    },
    Unparseable {
        text: String,
        reason: String,
    },
}

pub struct EpisodeStart<'a> {
    /// Full scenario; only scripted agents that stand in for an oracle look
    /// past the agent-facing parts.
    pub scenario: &'a Scenario,
    pub observation: &'a Observation,
    pub system_prompt: &'a str,
    pub experiences: &'a [ExperienceRecord],
}

pub trait Agent: Send {
    fn name(&self) -> String;
    fn begin(&mut self, start: &EpisodeStart<'_>);
    /// Next turn given the observations produced by the previous turn.
    fn next(&mut self, observations: &[Observation]) -> Result<Reply, BackendError>;
    /// Second chance after an unparseable turn.
    fn retry(&mut self, reason: &str) -> Result<Reply, BackendError> {
        Ok(Reply::Unparseable {
            text: String::new(),
            reason: reason.to_string(),
        })
    }
}

fn wait_target(call: &ToolCall, date: chrono::NaiveDate) -> Option<SimTime> {
    if call.name != "WaitUntil" {
        return None;
    }
    let text = call.arguments.get("time")?.as_str()?;
    SimTime::parse_relative(text, date)
}

/// Ads plan computed from what the agent has read.
#[derive(Debug, Clone, Default)]
struct AdsSolver {
    stage: usize,
    folder: String,
    csv: Option<String>,
    heatmap_path: Option<String>,
    heatmap: Option<String>,
    exact: Option<String>,
    budget: i64,
    pending: Option<ToolCall>,
}

fn parse_csv(text: &str) -> Vec<(String, i64, i64, String)> {
    text.lines()
        .skip(1)
        .filter_map(|l| {
            let f: Vec<&str> = l.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return None;
            }
            Some((
                f[0].to_string(),
                f[1].parse().ok()?,
                f[2].parse().ok()?,
                f[3].to_string(),
            ))
        })
        .collect()
}

fn parse_heatmap(text: &str) -> BTreeMap<String, f64> {
    let mut legend = BTreeMap::new();
    let mut out = BTreeMap::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("Legend: ") {
            for part in rest.split(", ") {
                if let Some((name, v)) = part.split_once(" = about ") {
                    if let Ok(v) = v.trim().parse::<f64>() {
                        legend.insert(name.trim().to_string(), v);
                    }
                }
            }
        } else if let Some((district, level)) = line.split_once(": ") {
            if let Some(v) = legend.get(level.trim()) {
                out.insert(district.trim().to_string(), *v);
            }
        }
    }
    out
}

fn parse_exact(text: &str) -> BTreeMap<String, f64> {
    let Some(start) = text.find("per district): ") else {
        return BTreeMap::new();
    };
    text[start + "per district): ".len()..]
        .lines()
        .next()
        .unwrap_or_default()
        .split("; ")
        .filter_map(|kv| {
            let (k, v) = kv.split_once('=')?;
            Some((k.trim().to_string(), v.trim().parse().ok()?))
        })
        .collect()
}

/// Hints the agent picked up from mentor messages.
#[derive(Debug, Clone, Default)]
struct HintState {
    density_key: Option<String>,
    knapsack: bool,
}

impl HintState {
    fn absorb(&mut self, text: &str) {
        if text.contains("ads_density") {
            if let Some(i) = text.find("key `") {
                let rest = &text[i + 5..];
                if let Some(end) = rest.find('`') {
                    self.density_key = Some(rest[..end].to_string());
                }
            }
        }
        if text.contains("knapsack") {
            self.knapsack = true;
        }
    }
}

impl AdsSolver {
    /// `steps` is the oracle script: ask, handbook, csv, density query, submit.
    fn next(&mut self, steps: &[ToolCall], hints: &HintState, task_id: &str) -> Option<ToolCall> {
        loop {
            let stage = self.stage;
            self.stage += 1;
            match stage {
                0 | 1 => return steps.get(stage).cloned(),
                2 => {
                    let csv = steps.get(2)?.clone();
                    let path = csv.arguments.get("path")?.as_str()?.to_string();
                    self.folder = path.rsplit_once('/').map(|(d, _)| format!("{d}/"))?;
                    return Some(csv);
                }
                3 => {
                    return Some(
                        ToolCall::new("OpenFolderInCloudDisk").arg("path", self.folder.clone()),
                    )
                }
                4 => match &self.heatmap_path {
                    Some(p) => return Some(ToolCall::new("ReadFile").arg("path", p.clone())),
                    None => continue,
                },
                5 => match &hints.density_key {
                    Some(k) => {
                        return Some(
                            ToolCall::new("QueryDatabase")
                                .arg("table", "ads_density")
                                .arg("key", k.clone()),
                        )
                    }
                    None => continue,
                },
                6 => return Some(self.plan(hints, task_id)),
                _ => return None,
            }
        }
    }

    fn absorb(&mut self, call: &ToolCall, payload: &str) {
        let path = call
            .arguments
            .get("path")
            .and_then(Value::as_str)
            .unwrap_or_default();
        match call.name.as_str() {
            "ReadFile" if path.ends_with("channels.csv") => self.csv = Some(payload.to_string()),
            "ReadFile" if path.ends_with(".png") => self.heatmap = Some(payload.to_string()),
            "OpenFolderInCloudDisk" => {
                self.heatmap_path = payload
                    .lines()
                    .map(str::trim)
                    .find(|l| l.contains("target_user_density_"))
                    .map(|l| format!("{}{}", self.folder, l.trim_start_matches("[file]").trim()));
            }
            "QueryDatabase" => self.exact = Some(payload.to_string()),
            _ => {}
        }
    }

    fn plan(&self, hints: &HintState, task_id: &str) -> ToolCall {
        let rows = parse_csv(self.csv.as_deref().unwrap_or_default());
        let density = match &self.exact {
            Some(t) => parse_exact(t),
            None => parse_heatmap(self.heatmap.as_deref().unwrap_or_default()),
        };
        let channels: Vec<Channel> = rows
            .iter()
            .map(|(name, cost, reach, district)| Channel {
                name: name.clone(),
                cost: *cost,
                exposure: *reach as f64 * density.get(district).copied().unwrap_or(0.0),
            })
            .collect();
        let pick = if hints.knapsack {
            best_channels(self.budget, &channels)
        } else {
            greedy_by_ratio(self.budget, &channels)
        };
        let reported: Vec<f64> = channels.iter().map(|c| c.exposure).collect();
        ToolCall::new("SubmitResult")
            .arg("task_id", task_id)
            .arg("content", ads_plan_text(&channels, &reported, &pick.subset))
    }
}

fn budget_from(description: &str) -> i64 {
    description
        .split("budget of ")
        .nth(1)
        .and_then(|r| r.split_whitespace().next())
        .and_then(|n| n.parse().ok())
        .unwrap_or(0)
}

enum Plan {
    Script(VecDeque<ToolCall>),
    Ads {
        solver: AdsSolver,
        steps: Vec<ToolCall>,
    },
}

impl Plan {
    fn is_done(&self) -> bool {
        match self {
            Plan::Script(s) => s.is_empty(),
            Plan::Ads { solver, .. } => solver.stage > 6,
        }
    }
}

struct Scripted {
    task_id: TaskId,
    plan: Plan,
    window: Option<Interval>,
    started: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Oracle,
    /// Skips every meeting.
    NoShow,
    /// Skips questions to colleagues unless a lesson names them.
    ExperienceFollowing,
    /// Works the ads task from files and follows mentor hints.
    HintFollowing,
}

/// Replays per-task oracle scripts, preempting work for meetings.
pub struct ScriptAgent {
    variant: Variant,
    tasks: Vec<Scripted>,
    released: BTreeSet<TaskId>,
    clock: SimTime,
    date: chrono::NaiveDate,
    future: Vec<SimTime>,
    hints: HintState,
    last: Option<usize>,
}

impl ScriptAgent {
    pub fn new(variant: Variant) -> Self {
        ScriptAgent {
            variant,
            tasks: Vec::new(),
            released: BTreeSet::new(),
            clock: SimTime::at(crate::time::base_date(), 9, 0),
            date: crate::time::base_date(),
            future: Vec::new(),
            hints: HintState::default(),
            last: None,
        }
    }

    pub fn oracle() -> Self {
        Self::new(Variant::Oracle)
    }

    /// AskNPC targets this agent keeps, as `(task, npc name)`.
    fn allowed_asks(start: &EpisodeStart<'_>) -> BTreeSet<(TaskId, String)> {
        let mut out = BTreeSet::new();
        for t in &start.scenario.hidden.tasks {
            for e in start.experiences.iter().filter(|e| e.rule_id == t.rule_id) {
                let key = e.source.checkpoint_key();
                let Some(cp) = t
                    .checkpoints
                    .iter()
                    .find(|c| c.checkpoint_id.ends_with(&format!(".{key}")))
                else {
                    continue;
                };
                if let Predicate::NpcAsked { npc, .. } = &cp.predicate {
                    if let Some(m) = start.scenario.hidden.npc_cast.get(npc) {
                        out.insert((t.task_id.clone(), m.profile.name.clone()));
                    }
                }
            }
        }
        out
    }

    fn observe(&mut self, obs: &Observation) {
        self.clock = self.clock.max(obs.clock);
        for t in &obs.tasks {
            self.released.insert(t.task_id.clone());
        }
        for n in &obs.notices {
            if n.kind == "message_arrival" && n.text.starts_with("New message from Mentor:") {
                self.hints.absorb(&n.text);
            }
        }
        if let (Some(i), Some(r)) = (self.last, &obs.result) {
            if let Plan::Ads { solver, .. } = &mut self.tasks[i].plan {
                solver.absorb_result(r);
            }
        }
    }

    /// Pops the next call of task `i`, skipping waits that already passed.
    fn pop(&mut self, i: usize) -> Option<ToolCall> {
        let date = self.date;
        let clock = self.clock;
        let hints = self.hints.clone();
        let t = &mut self.tasks[i];
        t.started = true;
        match &mut t.plan {
            Plan::Script(s) => {
                while let Some(c) = s.pop_front() {
                    match wait_target(&c, date) {
                        Some(at) if at <= clock => continue,
                        _ => return Some(c),
                    }
                }
                None
            }
            Plan::Ads { solver, steps } => {
                let call = solver.next(steps, &hints, &t.task_id);
                if let Some(c) = &call {
                    solver.pending = Some(c.clone());
                }
                call
            }
        }
    }

    fn runnable(&self, i: usize) -> bool {
        let t = &self.tasks[i];
        self.released.contains(&t.task_id) && !t.plan.is_done()
    }

    fn choose(&mut self) -> Option<ToolCall> {
        loop {
            let n = self.tasks.len();
            let critical = (0..n).find(|&i| {
                self.runnable(i)
                    && self.tasks[i].window.is_some_and(|w| {
                        self.tasks[i].started || self.clock.plus_minutes(1) >= w.start
                    })
            });
            let pick = critical
                .or_else(|| (0..n).find(|&i| self.runnable(i) && self.tasks[i].window.is_none()));
            let Some(i) = pick else {
                let waiting = (0..n).any(|i| !self.tasks[i].plan.is_done());
                let next = self
                    .future
                    .iter()
                    .copied()
                    .chain(
                        self.tasks
                            .iter()
                            .filter(|t| !t.plan.is_done() && !t.started)
                            .filter_map(|t| t.window.map(|w| w.start)),
                    )
                    .filter(|&at| at > self.clock)
                    .min();
                return match (waiting, next) {
                    (true, Some(at)) => {
                        self.last = None;
                        Some(ToolCall::new("WaitUntil").arg("time", at.hhmm()))
                    }
                    _ => None,
                };
            };
            if let Some(c) = self.pop(i) {
                self.last = Some(i);
                return Some(c);
            }
        }
    }
}

impl AdsSolver {
    fn absorb_result(&mut self, r: &crate::tools::ToolResult) {
        if let Some(call) = self.pending.take() {
            if r.is_ok() {
                self.absorb(&call, &r.payload);
            }
        }
    }
}

impl Agent for ScriptAgent {
    fn name(&self) -> String {
        match self.variant {
            Variant::Oracle => "oracle",
            Variant::NoShow => "no_show",
            Variant::ExperienceFollowing => "experience_following",
            Variant::HintFollowing => "hint_following",
        }
        .to_string()
    }

    fn begin(&mut self, start: &EpisodeStart<'_>) {
        let sc = start.scenario;
        self.date = sc.date;
        self.clock = start.observation.clock;
        self.released = start
            .observation
            .tasks
            .iter()
            .map(|t| t.task_id.clone())
            .collect();
        self.future = sc
            .hidden
            .timeline
            .iter()
            .filter(|e| e.event.kind() == "task_release")
            .map(|e| e.at)
            .collect();
        let asks = Self::allowed_asks(start);
        self.tasks = sc
            .hidden
            .tasks
            .iter()
            .map(|t| {
                let steps = t.oracle.steps.clone();
                let plan = if self.variant == Variant::HintFollowing
                    && t.rule_id == "ads_campaign_planning"
                {
                    Plan::Ads {
                        solver: AdsSolver {
                            budget: budget_from(&t.description),
                            ..AdsSolver::default()
                        },
                        steps,
                    }
                } else if self.variant == Variant::ExperienceFollowing {
                    Plan::Script(
                        steps
                            .into_iter()
                            .filter(|c| {
                                c.name != "AskNPC"
                                    || c.arguments.get("npc").and_then(Value::as_str).is_some_and(
                                        |n| asks.contains(&(t.task_id.clone(), n.to_string())),
                                    )
                            })
                            .collect(),
                    )
                } else if self.variant == Variant::NoShow && t.oracle.window.is_some() {
                    Plan::Script(VecDeque::new())
                } else {
                    Plan::Script(steps.into())
                };
                Scripted {
                    task_id: t.task_id.clone(),
                    plan,
                    window: t.oracle.window,
                    started: false,
                }
            })
            .collect();
        self.observe(start.observation);
    }

    fn next(&mut self, observations: &[Observation]) -> Result<Reply, BackendError> {
        for o in observations {
            self.observe(o);
        }
        Ok(match self.choose() {
            Some(call) => Reply::Act {
                thought: String::new(),
                calls: vec![call],
            },
            None => Reply::Stop {
                thought: "All scripted work is done.".into(),
            },
        })
    }
}

/// Uniformly random valid calls.
pub struct RandomAgent {
    rng: Stream,
    words: Vec<&'static str>,
    contacts: Vec<Contact>,
    catalog: Vec<ToolSpec>,
}

const CONTACT_PARAMS: [&str; 4] = ["receiver", "npc", "person", "participants"];

impl RandomAgent {
    pub fn new(seed: u64) -> Self {
        RandomAgent {
            rng: Stream::derive(seed, &["random_agent".into()]),
            words: pools::label_pool("words").unwrap_or_default(),
            contacts: Vec::new(),
            catalog: tools::catalog(),
        }
    }

    fn word(&mut self) -> String {
        if self.words.is_empty() {
            return "thing".to_string();
        }
        self.rng.pick(&self.words).to_string()
    }

    fn contact(&mut self) -> String {
        if self.contacts.is_empty() {
            return self.word();
        }
        self.rng.pick(&self.contacts).name.clone()
    }

    fn value(&mut self, name: &str, kind: ParamType) -> Value {
        if CONTACT_PARAMS.contains(&name) {
            let c = self.contact();
            return if kind == ParamType::List {
                Value::from(vec![c])
            } else {
                Value::from(c)
            };
        }
        match kind {
            ParamType::String => Value::from(self.word()),
            ParamType::Text => {
                let n = self.rng.range_inclusive(3, 6);
                Value::from((0..n).map(|_| self.word()).collect::<Vec<_>>().join(" "))
            }
            ParamType::Datetime => {
                let m = self.rng.range_inclusive(9 * 60, 18 * 60 - 1);
                Value::from(format!("{:02}:{:02}", m / 60, m % 60))
            }
            ParamType::List => Value::from(vec![self.word()]),
        }
    }

    fn call(&mut self) -> ToolCall {
        let spec = self.rng.pick(&self.catalog).clone();
        let mut call = ToolCall::new(&spec.name);
        for p in &spec.parameters {
            if p.required || self.rng.chance(0.5) {
                let v = self.value(&p.name, p.kind);
                call = call.arg(&p.name, v);
            }
        }
        call
    }
}

impl Agent for RandomAgent {
    fn name(&self) -> String {
        "random".into()
    }

    fn begin(&mut self, start: &EpisodeStart<'_>) {
        self.contacts = start.observation.contacts.clone();
    }

    fn next(&mut self, _: &[Observation]) -> Result<Reply, BackendError> {
        Ok(Reply::Act {
            thought: String::new(),
            calls: vec![self.call()],
        })
    }
}
