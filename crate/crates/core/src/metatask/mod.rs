//! Meta-task rules, seeded draws and instantiation into task instances.
//!
//! A rule is a JSON manifest (text templates, entity slots, clue and
//! checkpoint templates) plus a builder in [`rules`] that generates the
//! rule's data and wires predicates. [`rnd`] turns `(seed, rule)` into a
//! [`RandomDraw`]; [`instantiate`] turns the draw into a [`TaskInstance`]
//! carrying its description, checkpoints, hidden clues, the world content
//! it needs and an oracle script that solves it.

pub mod eventplan;
pub mod knapsack;
pub mod pools;
pub mod rules;
pub mod template;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{GenerationError, InstantiateError};
use crate::npc::{self, NpcProfile, ReplyRule, Trigger};
use crate::rng::{derive_key, Stream, Tag};
use crate::time::{base_date, standard_workday, Interval, SimTime};
use crate::verifier::checkpoint::{Checkpoint, Predicate};
use crate::world::{
    ClueId, FileEntry, Meeting, Message, NpcId, Priority, Record, TaskId, ToolCall,
};

pub use eventplan::event_plan_opt;
pub use knapsack::knapsack_opt;
pub use rules::RuleData;

pub const EMAIL_DOMAIN: &str = "knowledgex.com";
pub const COMPANY: &str = "KnowledgeX";

pub fn agent_email() -> String {
    format!(
        "{}@{EMAIL_DOMAIN}",
        npc::slug(pools::AGENT_NAME).replace('_', ".")
    )
}

const MANIFESTS: [&str; 10] = [
    include_str!("../../resources/rules/ads_campaign_planning.json"),
    include_str!("../../resources/rules/contact_lookup.json"),
    include_str!("../../resources/rules/data_completion.json"),
    include_str!("../../resources/rules/event_planning.json"),
    include_str!("../../resources/rules/inbox_triage.json"),
    include_str!("../../resources/rules/meeting_attendance.json"),
    include_str!("../../resources/rules/report_drafting.json"),
    include_str!("../../resources/rules/schedule_coordination.json"),
    include_str!("../../resources/rules/transaction_auditing.json"),
    include_str!("../../resources/rules/website_monitoring.json"),
];

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    InfoSynthesis,
    TimeManagement,
    ProactiveInquiry,
    StrategicModeling,
}

impl Domain {
    pub const ALL: [Domain; 4] = [
        Domain::InfoSynthesis,
        Domain::TimeManagement,
        Domain::ProactiveInquiry,
        Domain::StrategicModeling,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Easy,
    Hard,
}

impl Difficulty {
    /// Easy: at most 10 oracle actions, at most one clue, no optimization.
    pub fn classify(oracle_actions: usize, clues: usize, optimization: bool) -> Self {
        if oracle_actions <= 10 && clues <= 1 && !optimization {
            Difficulty::Easy
        } else {
            Difficulty::Hard
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySlot {
    pub name: String,
    #[serde(flatten)]
    pub kind: SlotKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlotKind {
    /// An NPC drawn from the global name pool.
    Persona {
        role: String,
        department: String,
        /// Slots with the same key in different rules of one scenario are
        /// played by a single NPC.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shared: Option<String>,
    },
    Label {
        pool: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CustodianTemplate {
    Npc(String),
    File(String),
    Data { table: String, key: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClueTemplate {
    pub key: String,
    pub custodian: CustodianTemplate,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointTemplate {
    pub key: String,
    pub description: String,
    pub feedback: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplyTemplate {
    pub key: String,
    pub npc: String,
    pub keywords: Vec<String>,
    pub reply: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub releases: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaTaskRule {
    pub version: u32,
    pub rule_id: String,
    pub title: String,
    pub domain: Domain,
    pub difficulty: Difficulty,
    #[serde(default)]
    pub time_critical: bool,
    #[serde(default)]
    pub optimization: bool,
    #[serde(rename = "slots")]
    pub entity_slots: Vec<EntitySlot>,
    pub description: String,
    #[serde(rename = "clues")]
    pub clue_templates: Vec<ClueTemplate>,
    #[serde(rename = "checkpoints")]
    pub checkpoint_templates: Vec<CheckpointTemplate>,
    #[serde(rename = "replies")]
    pub reply_templates: Vec<ReplyTemplate>,
    #[serde(default)]
    pub texts: BTreeMap<String, String>,
}

impl MetaTaskRule {
    pub fn slot(&self, name: &str) -> Option<&EntitySlot> {
        self.entity_slots.iter().find(|s| s.name == name)
    }

    fn persona_slot(&self, name: &str) -> bool {
        matches!(
            self.slot(name),
            Some(EntitySlot {
                kind: SlotKind::Persona { .. },
                ..
            })
        )
    }

    /// Structural checks on a manifest; returns the list of problems.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.version != MANIFEST_VERSION {
            out.push(format!("unsupported manifest version {}", self.version));
        }
        let clue_keys: BTreeSet<&str> =
            self.clue_templates.iter().map(|c| c.key.as_str()).collect();
        for c in &self.clue_templates {
            if c.content.trim().is_empty() {
                out.push(format!("clue {} has empty content", c.key));
            }
            if let CustodianTemplate::Npc(slot) = &c.custodian {
                if !self.persona_slot(slot) {
                    out.push(format!(
                        "clue {} names unknown custodian slot {slot}",
                        c.key
                    ));
                }
                if !self
                    .reply_templates
                    .iter()
                    .any(|r| r.releases.as_deref() == Some(c.key.as_str()))
                {
                    out.push(format!("npc clue {} has no reply that releases it", c.key));
                }
            }
        }
        for cp in &self.checkpoint_templates {
            if cp.feedback.trim().is_empty() || cp.description.trim().is_empty() {
                out.push(format!(
                    "checkpoint {} lacks description or feedback",
                    cp.key
                ));
            }
        }
        for r in &self.reply_templates {
            if !self.persona_slot(&r.npc) {
                out.push(format!("reply {} names unknown npc slot {}", r.key, r.npc));
            }
            if r.keywords.is_empty() {
                out.push(format!("reply {} has no keywords", r.key));
            }
            if let Some(k) = &r.releases {
                if !clue_keys.contains(k.as_str()) {
                    out.push(format!("reply {} releases unknown clue {k}", r.key));
                }
            }
        }
        out
    }
}

fn registry() -> &'static Vec<MetaTaskRule> {
    static RULES: OnceLock<Vec<MetaTaskRule>> = OnceLock::new();
    RULES.get_or_init(|| {
        let mut rules: Vec<MetaTaskRule> = MANIFESTS
            .iter()
            .map(|m| {
                crate::canonical::decode(m.as_bytes())
                    .unwrap_or_else(|e| panic!("built-in rule manifest is invalid: {e}"))
            })
            .collect();
        rules.sort_by(|a, b| a.rule_id.cmp(&b.rule_id));
        rules
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleFilter {
    #[serde(default)]
    pub domain: Option<Domain>,
    #[serde(default)]
    pub difficulty: Option<Difficulty>,
}

/// Registered rules matching `filter`, ordered by rule id.
pub fn list_rules(filter: RuleFilter) -> Vec<MetaTaskRule> {
    registry()
        .iter()
        .filter(|r| filter.domain.is_none_or(|d| r.domain == d))
        .filter(|r| filter.difficulty.is_none_or(|d| r.difficulty == d))
        .cloned()
        .collect()
}

pub fn find_rule(rule_id: &str) -> Result<&'static MetaTaskRule, GenerationError> {
    registry()
        .iter()
        .find(|r| r.rule_id == rule_id)
        .ok_or_else(|| GenerationError::UnknownRule(rule_id.to_string()))
}

pub fn rule_ids() -> Vec<String> {
    registry().iter().map(|r| r.rule_id.clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonaDraw {
    pub slot: String,
    pub profile: NpcProfile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shared: Option<String>,
}

/// Times drawn for a task; the composer may move them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleDraw {
    /// `(start minute of day, duration minutes)` for time-critical tasks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<(u32, u32)>,
    /// Minute of day a timed task is published.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub release_minute: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomDraw {
    pub seed: u64,
    pub rule_id: String,
    pub personas: Vec<PersonaDraw>,
    pub labels: BTreeMap<String, String>,
    pub env_data: RuleData,
    pub schedule: ScheduleDraw,
}

impl RandomDraw {
    pub fn persona(&self, slot: &str) -> Option<&NpcProfile> {
        self.personas
            .iter()
            .find(|p| p.slot == slot)
            .map(|p| &p.profile)
    }
}

/// `"Hong Kong"` -> `"hong_kong"`.
pub fn slugify(text: &str) -> String {
    npc::slug(text)
}

/// Picks an unused full name from the global pool.
pub fn draw_name(stream: &mut Stream, taken: &BTreeSet<String>) -> Option<String> {
    let first = pools::first_names();
    let last = pools::last_names();
    for _ in 0..64 {
        let name = format!("{} {}", stream.pick(&first), stream.pick(&last));
        if name != pools::AGENT_NAME && !taken.contains(&name) {
            return Some(name);
        }
    }
    None
}

pub fn persona_stream(seed: u64, rule_id: &str) -> Stream {
    Stream::derive(seed, &[Tag::from(rule_id), Tag::from("personas")])
}

/// Stream used for the `attempt`-th re-draw of a slot after a conflict.
pub fn resample_stream(seed: u64, rule_id: &str, slot: &str, attempt: u32) -> Stream {
    Stream::derive(
        seed,
        &[
            Tag::from(rule_id),
            Tag::from("resample"),
            Tag::from(slot),
            Tag::from(attempt as u64),
        ],
    )
}

pub fn make_persona(slot: &EntitySlot, name: &str) -> PersonaDraw {
    let SlotKind::Persona {
        role,
        department,
        shared,
    } = &slot.kind
    else {
        panic!("slot {} is not a persona slot", slot.name);
    };
    PersonaDraw {
        slot: slot.name.clone(),
        profile: NpcProfile::new(name, role, department, EMAIL_DOMAIN),
        shared: shared.clone(),
    }
}

/// The randomization engine: everything an instance needs, from one seed.
///
/// Personas, labels, rule data and times come from independent sub-streams
/// keyed by `(seed, rule_id, component)`, so changing one pool never moves
/// the numbers drawn for another component.
pub fn rnd(seed: u64, rule: &MetaTaskRule) -> Result<RandomDraw, GenerationError> {
    let mut personas = Vec::new();
    let mut taken = BTreeSet::new();
    let mut ps = persona_stream(seed, &rule.rule_id);
    let mut labels = BTreeMap::new();
    let mut ls = Stream::derive(
        seed,
        &[Tag::from(rule.rule_id.as_str()), Tag::from("labels")],
    );
    for slot in &rule.entity_slots {
        match &slot.kind {
            SlotKind::Persona { .. } => {
                let name =
                    draw_name(&mut ps, &taken).ok_or_else(|| GenerationError::PoolExhausted {
                        pool: "names".into(),
                        slot: slot.name.clone(),
                    })?;
                taken.insert(name.clone());
                personas.push(make_persona(slot, &name));
            }
            SlotKind::Label { pool } => {
                let entries = pools::label_pool(pool)?;
                let used: BTreeSet<&String> = labels.values().collect();
                let free: Vec<&str> = entries
                    .iter()
                    .copied()
                    .filter(|e| !used.contains(&e.to_string()))
                    .collect();
                if free.is_empty() {
                    return Err(GenerationError::PoolExhausted {
                        pool: pool.clone(),
                        slot: slot.name.clone(),
                    });
                }
                labels.insert(slot.name.clone(), ls.pick(&free).to_string());
            }
        }
    }
    let mut env = Stream::derive(seed, &[Tag::from(rule.rule_id.as_str()), Tag::from("env")]);
    let env_data = rules::draw_env(&rule.rule_id, &mut env)?;
    let mut ss = Stream::derive(
        seed,
        &[Tag::from(rule.rule_id.as_str()), Tag::from("schedule")],
    );
    let schedule = rules::draw_schedule(rule, &mut ss);
    Ok(RandomDraw {
        seed,
        rule_id: rule.rule_id.clone(),
        personas,
        labels,
        env_data,
        schedule,
    })
}

/// Where a clue lives and what unlocks it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Custodian {
    /// Released when the NPC is asked a message containing every keyword.
    Npc {
        npc: NpcId,
        keywords: BTreeSet<String>,
    },
    File {
        path: String,
    },
    Data {
        table: String,
        key: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clue {
    pub clue_id: ClueId,
    pub content: String,
    pub custodian: Custodian,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Reveal {
    AtStart,
    AtTime {
        at: SimTime,
    },
    /// Published while the agent attends the meeting of another task.
    DuringTask {
        task_id: TaskId,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NpcSeed {
    pub slot: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shared: Option<String>,
    pub profile: NpcProfile,
    pub rules: Vec<ReplyRule>,
}

/// World content an instance contributes to its scenario.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskWorld {
    pub npcs: Vec<NpcSeed>,
    pub files: BTreeMap<String, FileEntry>,
    pub tables: BTreeMap<String, BTreeMap<String, Record>>,
    pub meetings: Vec<Meeting>,
    /// Messages delivered to the agent at their `sent_at` time.
    pub messages: Vec<Message>,
}

/// Ground-truth solution path. `window` marks scripts that must run inside
/// a fixed interval (meetings).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleScript {
    pub steps: Vec<ToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub task_id: TaskId,
    pub rule_id: String,
    pub title: String,
    pub domain: Domain,
    pub difficulty: Difficulty,
    pub description: String,
    pub checkpoints: Vec<Checkpoint>,
    pub clues: Vec<Clue>,
    pub deadline: Option<SimTime>,
    pub priority: Priority,
    pub reveal: Reveal,
    pub oracle: OracleScript,
    pub world: TaskWorld,
    /// Tiered guidance texts, tier 1 first.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hints: Vec<String>,
}

/// Placement of an instance inside a scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceContext {
    pub task_id: TaskId,
    pub date: NaiveDate,
}

impl Default for InstanceContext {
    fn default() -> Self {
        InstanceContext {
            task_id: "T1".into(),
            date: base_date(),
        }
    }
}

pub fn instantiate(
    rule: &MetaTaskRule,
    draw: &RandomDraw,
) -> Result<TaskInstance, InstantiateError> {
    instantiate_in(rule, draw, &InstanceContext::default())
}

pub fn instantiate_in(
    rule: &MetaTaskRule,
    draw: &RandomDraw,
    ctx: &InstanceContext,
) -> Result<TaskInstance, InstantiateError> {
    if draw.rule_id != rule.rule_id || draw.env_data.rule_id() != rule.rule_id {
        return Err(InstantiateError::RuleMismatch {
            rule: rule.rule_id.clone(),
            draw: draw.rule_id.clone(),
        });
    }
    let mut b = Builder::new(rule, draw, ctx)?;
    rules::build(&mut b, &draw.env_data)?;
    b.finish()
}

/// The oracle action script of an instance.
pub fn oracle_solve(instance: &TaskInstance) -> Vec<ToolCall> {
    instance.oracle.steps.clone()
}

/// Accumulates an instance while a rule builder runs.
pub struct Builder<'a> {
    pub rule: &'a MetaTaskRule,
    pub draw: &'a RandomDraw,
    pub ctx: &'a InstanceContext,
    vars: BTreeMap<String, String>,
    checkpoints: Vec<Checkpoint>,
    clues: Vec<Clue>,
    world: TaskWorld,
    steps: Vec<ToolCall>,
    window: Option<Interval>,
    deadline: Option<SimTime>,
    priority: Priority,
    reveal: Reveal,
    hints: Vec<String>,
}

impl<'a> Builder<'a> {
    fn new(
        rule: &'a MetaTaskRule,
        draw: &'a RandomDraw,
        ctx: &'a InstanceContext,
    ) -> Result<Self, InstantiateError> {
        let workday = standard_workday(ctx.date);
        let mut vars = BTreeMap::new();
        vars.insert("task_id".to_string(), ctx.task_id.clone());
        vars.insert("date".to_string(), ctx.date.to_string());
        vars.insert("deadline".to_string(), workday.end.hhmm());
        let mut world = TaskWorld::default();
        for slot in &rule.entity_slots {
            match &slot.kind {
                SlotKind::Persona { .. } => {
                    let pd = draw
                        .personas
                        .iter()
                        .find(|p| p.slot == slot.name)
                        .ok_or_else(|| InstantiateError::MissingValue(slot.name.clone()))?;
                    let p = &pd.profile;
                    let (first, last) = p.name.split_once(' ').unwrap_or((p.name.as_str(), ""));
                    for (k, v) in [
                        (String::new(), p.name.clone()),
                        (".first".into(), first.to_string()),
                        (".last".into(), last.to_string()),
                        (".email".into(), p.email.clone()),
                        (".id".into(), p.id.clone()),
                        (".role".into(), p.role.clone()),
                    ] {
                        vars.insert(format!("{}{k}", slot.name), v);
                    }
                    world.npcs.push(NpcSeed {
                        slot: slot.name.clone(),
                        shared: pd.shared.clone(),
                        profile: p.clone(),
                        rules: Vec::new(),
                    });
                }
                SlotKind::Label { .. } => {
                    let v = draw
                        .labels
                        .get(&slot.name)
                        .ok_or_else(|| InstantiateError::MissingValue(slot.name.clone()))?;
                    vars.insert(slot.name.clone(), v.clone());
                    vars.insert(format!("{}.slug", slot.name), slugify(v));
                }
            }
        }
        Ok(Builder {
            rule,
            draw,
            ctx,
            vars,
            checkpoints: Vec::new(),
            clues: Vec::new(),
            world,
            steps: Vec::new(),
            window: None,
            deadline: Some(workday.end),
            priority: Priority::Normal,
            reveal: Reveal::AtStart,
            hints: Vec::new(),
        })
    }

    pub fn task_id(&self) -> &str {
        &self.ctx.task_id
    }

    pub fn date(&self) -> NaiveDate {
        self.ctx.date
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.vars.insert(key.to_string(), value.into());
    }

    pub fn var(&self, key: &str) -> Result<&str, InstantiateError> {
        self.vars
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| InstantiateError::MissingValue(key.to_string()))
    }

    pub fn render(&self, template: &str) -> Result<String, InstantiateError> {
        template::render(template, &self.vars)
    }

    pub fn text(&self, key: &str) -> Result<String, InstantiateError> {
        let t = self
            .rule
            .texts
            .get(key)
            .ok_or_else(|| InstantiateError::MissingTemplate {
                rule: self.rule.rule_id.clone(),
                key: key.to_string(),
            })?;
        self.render(t)
    }

    pub fn persona(&self, slot: &str) -> Result<&'a NpcProfile, InstantiateError> {
        self.draw
            .persona(slot)
            .ok_or_else(|| InstantiateError::MissingValue(slot.to_string()))
    }

    pub fn label(&self, slot: &str) -> Result<&'a str, InstantiateError> {
        self.draw
            .labels
            .get(slot)
            .map(String::as_str)
            .ok_or_else(|| InstantiateError::MissingValue(slot.to_string()))
    }

    fn id(&self, key: &str) -> String {
        format!("{}.{key}", self.ctx.task_id)
    }

    /// Concretizes the clue template `key`; returns its id.
    pub fn clue(&mut self, key: &str) -> Result<ClueId, InstantiateError> {
        let t = self
            .rule
            .clue_templates
            .iter()
            .find(|c| c.key == key)
            .ok_or_else(|| InstantiateError::MissingTemplate {
                rule: self.rule.rule_id.clone(),
                key: format!("clues.{key}"),
            })?;
        let custodian = match &t.custodian {
            CustodianTemplate::Npc(slot) => {
                let reply = self
                    .rule
                    .reply_templates
                    .iter()
                    .find(|r| r.releases.as_deref() == Some(key))
                    .ok_or_else(|| InstantiateError::MissingTemplate {
                        rule: self.rule.rule_id.clone(),
                        key: format!("replies releasing {key}"),
                    })?;
                Custodian::Npc {
                    npc: self.persona(slot)?.id.clone(),
                    keywords: Trigger::all_of(&reply.keywords).keywords,
                }
            }
            CustodianTemplate::File(path) => Custodian::File {
                path: crate::world::normalize_path(&self.render(path)?),
            },
            CustodianTemplate::Data { table, key } => Custodian::Data {
                table: self.render(table)?,
                key: self.render(key)?,
            },
        };
        let clue = Clue {
            clue_id: self.id(key),
            content: self.render(&t.content)?,
            custodian,
        };
        let id = clue.clue_id.clone();
        self.clues.push(clue);
        Ok(id)
    }

    pub fn clue_content(&self, id: &str) -> Option<&str> {
        self.clues
            .iter()
            .find(|c| c.clue_id == id)
            .map(|c| c.content.as_str())
    }

    /// Path of a file-held clue.
    pub fn clue_file(&self, id: &str) -> Result<String, InstantiateError> {
        match self
            .clues
            .iter()
            .find(|c| c.clue_id == id)
            .map(|c| &c.custodian)
        {
            Some(Custodian::File { path }) => Ok(path.clone()),
            _ => Err(InstantiateError::MissingValue(format!("file of clue {id}"))),
        }
    }

    pub fn checkpoint(&mut self, key: &str, predicate: Predicate) -> Result<(), InstantiateError> {
        let t = self
            .rule
            .checkpoint_templates
            .iter()
            .find(|c| c.key == key)
            .ok_or_else(|| InstantiateError::MissingTemplate {
                rule: self.rule.rule_id.clone(),
                key: format!("checkpoints.{key}"),
            })?;
        self.checkpoints.push(Checkpoint {
            checkpoint_id: self.id(key),
            task_id: self.ctx.task_id.clone(),
            predicate,
            description: self.render(&t.description)?,
            feedback: self.render(&t.feedback)?,
        });
        Ok(())
    }

    /// Installs every reply template on its NPC.
    pub fn replies(&mut self) -> Result<(), InstantiateError> {
        for r in &self.rule.reply_templates {
            let rule = ReplyRule {
                trigger: Trigger::all_of(&r.keywords),
                reply: self.render(&r.reply)?,
                releases: r.releases.as_ref().map(|k| self.id(k)),
            };
            let seed = self
                .world
                .npcs
                .iter_mut()
                .find(|n| n.slot == r.npc)
                .ok_or_else(|| InstantiateError::MissingValue(r.npc.clone()))?;
            seed.rules.push(rule);
        }
        Ok(())
    }

    pub fn file(&mut self, path: &str, content: impl Into<String>) {
        self.world.files.insert(
            crate::world::normalize_path(path),
            FileEntry {
                content: content.into(),
                read_only: true,
            },
        );
    }

    pub fn row(&mut self, table: &str, key: &str, record: Record) {
        self.world
            .tables
            .entry(table.to_string())
            .or_default()
            .insert(key.to_string(), record);
    }

    pub fn meeting(&mut self, meeting: Meeting) {
        self.world.meetings.push(meeting);
    }

    pub fn message(&mut self, message: Message) {
        self.world.messages.push(message);
    }

    pub fn step(&mut self, call: ToolCall) {
        self.steps.push(call);
    }

    pub fn window(&mut self, interval: Interval) {
        self.window = Some(interval);
    }

    pub fn deadline(&mut self, at: Option<SimTime>) {
        self.deadline = at;
        if let Some(t) = at {
            self.set("deadline", t.hhmm());
        }
    }

    pub fn deadline_time(&self) -> Option<SimTime> {
        self.deadline
    }

    pub fn priority(&mut self, p: Priority) {
        self.priority = p;
    }

    pub fn reveal(&mut self, r: Reveal) {
        self.reveal = r;
    }

    pub fn hint(&mut self, text: String) {
        self.hints.push(text);
    }

    fn finish(self) -> Result<TaskInstance, InstantiateError> {
        let description = self.render(&self.rule.description)?;
        Ok(TaskInstance {
            task_id: self.ctx.task_id.clone(),
            rule_id: self.rule.rule_id.clone(),
            title: self.rule.title.clone(),
            domain: self.rule.domain,
            difficulty: self.rule.difficulty,
            description,
            checkpoints: self.checkpoints,
            clues: self.clues,
            deadline: self.deadline,
            priority: self.priority,
            reveal: self.reveal,
            oracle: OracleScript {
                steps: self.steps,
                window: self.window,
            },
            world: self.world,
            hints: self.hints,
        })
    }
}

/// Key used to derive the per-task seed inside a scenario.
pub fn task_seed(scenario_seed: u64, index: usize, rule_id: &str) -> u64 {
    derive_key(
        scenario_seed,
        &[
            Tag::from("task"),
            Tag::from(index as u64),
            Tag::from(rule_id),
        ],
    )
}
