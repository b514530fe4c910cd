//! Composite scenarios and benchmarks.
//!
//! [`compose`] instantiates several rules with hash-derived sub-seeds,
//! resolves name and label collisions, places time-critical intervals on the
//! workday, optionally links one task to a meeting (the task is published
//! while the agent attends), merges the NPC cast and lays out the timeline.
//! [`build_benchmark`] repeats this for `n` seeded scenarios.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::error::{ComposeError, DecodeError, GenerationError};
use crate::metatask::{
    self, draw_name, instantiate_in, make_persona, pools, resample_stream, rnd, task_seed, Clue,
    Custodian, InstanceContext, MetaTaskRule, Reveal, SlotKind, TaskInstance,
};
use crate::npc::{NpcProfile, NpcState, ReplyRule};
use crate::rng::{derive_key, Stream, Tag};
use crate::time::{base_date, standard_workday, Interval, SimTime};
use crate::tools::{self, ToolSpec};
use crate::world::{
    Activity, AgentState, Contact, EventBody, FileEntry, Meeting, MeetingId, Observation, Persona,
    Record, Table, TaskBrief, TaskId, WorldState,
};

pub const SCENARIO_FORMAT: &str = "worksim.scenario";
pub const BENCHMARK_FORMAT: &str = "worksim.benchmark";
pub const SCHEMA_VERSION: u32 = 1;
pub const MAX_TASKS: usize = 6;
/// Re-draws allowed when a name collides before composition fails.
pub const NAME_RETRIES: u32 = 32;
pub const AGENT_ROLE: &str = "Intern";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CastMember {
    pub profile: NpcProfile,
    pub rules: Vec<ReplyRule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub at: SimTime,
    pub event: EventBody,
}

/// Everything the agent must discover or must not see up front.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hidden {
    pub tasks: Vec<TaskInstance>,
    pub npc_cast: BTreeMap<String, CastMember>,
    pub files: BTreeMap<String, FileEntry>,
    pub data: BTreeMap<String, BTreeMap<String, Record>>,
    pub timeline: Vec<TimelineEntry>,
    pub meeting_reveals: BTreeMap<MeetingId, Vec<TaskId>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub scenario_id: String,
    pub seed: u64,
    pub date: NaiveDate,
    pub workday: Interval,
    pub persona: Persona,
    pub rule_ids: Vec<String>,
    pub hidden: Hidden,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComposeOptions {
    pub date: NaiveDate,
    /// Chance of linking one eligible task to a meeting.
    pub dependency_probability: f64,
}

impl Default for ComposeOptions {
    fn default() -> Self {
        ComposeOptions {
            date: base_date(),
            dependency_probability: 0.5,
        }
    }
}

pub fn agent_persona() -> Persona {
    Persona {
        name: pools::AGENT_NAME.to_string(),
        email: metatask::agent_email(),
        role: AGENT_ROLE.to_string(),
        company: metatask::COMPANY.to_string(),
    }
}

pub fn compose(rules: &[MetaTaskRule], seed: u64) -> Result<Scenario, ComposeError> {
    compose_with(rules, seed, &ComposeOptions::default())
}

/// Shared persona slot: the NPC playing it and the rules already using it.
struct SharedSeat {
    name: String,
    rules: BTreeSet<String>,
}

pub fn compose_with(
    rules: &[MetaTaskRule],
    seed: u64,
    opts: &ComposeOptions,
) -> Result<Scenario, ComposeError> {
    if rules.is_empty() || rules.len() > MAX_TASKS {
        return Err(ComposeError::RuleCount(rules.len()));
    }
    let workday = standard_workday(opts.date);
    let mut used_names: BTreeSet<String> = [pools::AGENT_NAME.to_string()].into();
    let mut shared: BTreeMap<String, SharedSeat> = BTreeMap::new();
    let mut used_labels: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut windows: Vec<Interval> = Vec::new();
    let mut tasks = Vec::with_capacity(rules.len());

    for (i, rule) in rules.iter().enumerate() {
        let sub = task_seed(seed, i, &rule.rule_id);
        let mut draw = rnd(sub, rule)?;

        for p in draw.personas.iter_mut() {
            let slot = rule.slot(&p.slot).expect("draw slots come from the rule");
            if let Some(key) = &p.shared {
                if let Some(seat) = shared.get_mut(key) {
                    if !seat.rules.contains(&rule.rule_id) {
                        seat.rules.insert(rule.rule_id.clone());
                        *p = make_persona(slot, &seat.name);
                        continue;
                    }
                }
            }
            if used_names.contains(&p.profile.name) {
                let mut fresh = None;
                for attempt in 0..NAME_RETRIES {
                    let mut s = resample_stream(sub, &rule.rule_id, &p.slot, attempt);
                    if let Some(n) = draw_name(&mut s, &used_names) {
                        fresh = Some(n);
                        break;
                    }
                }
                let name = fresh.ok_or_else(|| ComposeError::NameExhaustion {
                    slot: p.slot.clone(),
                    attempts: NAME_RETRIES,
                })?;
                *p = make_persona(slot, &name);
            }
            used_names.insert(p.profile.name.clone());
            if let Some(key) = &p.shared {
                shared.entry(key.clone()).or_insert_with(|| SharedSeat {
                    name: p.profile.name.clone(),
                    rules: [rule.rule_id.clone()].into(),
                });
            }
        }

        for slot in &rule.entity_slots {
            let SlotKind::Label { pool } = &slot.kind else {
                continue;
            };
            let taken = used_labels.entry(pool.clone()).or_default();
            let current = draw.labels[&slot.name].clone();
            if taken.contains(&current) {
                let free: Vec<&str> = pools::label_pool(pool)?
                    .into_iter()
                    .filter(|l| !taken.contains(*l))
                    .collect();
                if free.is_empty() {
                    return Err(GenerationError::PoolExhausted {
                        pool: pool.clone(),
                        slot: slot.name.clone(),
                    }
                    .into());
                }
                let mut s = Stream::derive(
                    sub,
                    &[
                        Tag::from(rule.rule_id.as_str()),
                        Tag::from("relabel"),
                        Tag::from(slot.name.as_str()),
                    ],
                );
                draw.labels
                    .insert(slot.name.clone(), s.pick(&free).to_string());
            }
            taken.insert(draw.labels[&slot.name].clone());
        }

        if let Some((start, duration)) = draw.schedule.window {
            let placed = place_window(
                sub,
                &rule.rule_id,
                opts.date,
                start,
                duration,
                &windows,
                &workday,
            )?;
            windows.push(interval_of(opts.date, placed, duration));
            draw.schedule.window = Some((placed, duration));
        }

        let ctx = InstanceContext {
            task_id: format!("T{}", i + 1),
            date: opts.date,
        };
        tasks.push(instantiate_in(rule, &draw, &ctx)?);
    }

    let meeting_reveals = link_dependency(&mut tasks, seed, opts.dependency_probability);
    let all_clues: Vec<Clue> = tasks.iter().flat_map(|t| t.clues.clone()).collect();
    let seeds: Vec<metatask::NpcSeed> = tasks.iter().flat_map(|t| t.world.npcs.clone()).collect();
    let npc_cast = merge_npc_rules(&seeds, &all_clues)?;
    let (files, data) = merge_entities(&tasks)?;
    let timeline = build_timeline(&tasks);

    Ok(Scenario {
        scenario_id: format!("scn-{seed}"),
        seed,
        date: opts.date,
        workday,
        persona: agent_persona(),
        rule_ids: rules.iter().map(|r| r.rule_id.clone()).collect(),
        hidden: Hidden {
            tasks,
            npc_cast,
            files,
            data,
            timeline,
            meeting_reveals,
        },
    })
}

fn interval_of(date: NaiveDate, start: u32, duration: u32) -> Interval {
    let at = |m: u32| SimTime::at(date, m / 60, m % 60);
    Interval::new(at(start), at(start + duration))
}

/// Moves a drawn window off already placed ones: random re-draws first, then
/// a scan of the half-hour grid.
fn place_window(
    sub: u64,
    rule_id: &str,
    date: NaiveDate,
    start: u32,
    duration: u32,
    placed: &[Interval],
    workday: &Interval,
) -> Result<u32, ComposeError> {
    let free = |s: u32| {
        let iv = interval_of(date, s, duration);
        iv.within(workday) && placed.iter().all(|p| !p.overlaps(&iv))
    };
    if free(start) {
        return Ok(start);
    }
    let grid = metatask::rules::grid(9 * 60 + 30, 17 * 60 - duration);
    let mut s = Stream::derive(sub, &[Tag::from(rule_id), Tag::from("reschedule")]);
    for _ in 0..NAME_RETRIES {
        let c = *s.pick(&grid);
        if free(c) {
            return Ok(c);
        }
    }
    grid.into_iter().find(|&c| free(c)).ok_or_else(|| {
        ComposeError::WorkdayTooShort(format!(
            "{} minutes for {rule_id} next to {} placed meetings",
            duration,
            placed.len()
        ))
    })
}

/// With probability `p`, publishes one at-start task only while the agent
/// attends another task's meeting.
fn link_dependency(
    tasks: &mut [TaskInstance],
    seed: u64,
    p: f64,
) -> BTreeMap<MeetingId, Vec<TaskId>> {
    let mut reveals = BTreeMap::new();
    if tasks.len() < 2 {
        return reveals;
    }
    let mut pairs = Vec::new();
    for (mi, m) in tasks.iter().enumerate() {
        let Some(meeting) = m.world.meetings.first() else {
            continue;
        };
        for (ti, t) in tasks.iter().enumerate() {
            if ti != mi && t.reveal == Reveal::AtStart && t.oracle.window.is_none() {
                pairs.push((mi, ti, meeting.meeting_id.clone()));
            }
        }
    }
    if pairs.is_empty() {
        return reveals;
    }
    let mut s = Stream::derive(seed, &[Tag::from("dependency")]);
    if !s.chance(p) {
        return reveals;
    }
    let (mi, ti, meeting_id) = s.pick(&pairs).clone();
    tasks[ti].reveal = Reveal::DuringTask {
        task_id: tasks[mi].task_id.clone(),
    };
    reveals.insert(meeting_id, vec![tasks[ti].task_id.clone()]);
    reveals
}

/// Merges per-task NPC seeds into one cast. Reply rules of an NPC that holds
/// clues of several tasks must have pairwise disjoint keyword sets.
pub fn merge_npc_rules(
    seeds: &[metatask::NpcSeed],
    clues: &[Clue],
) -> Result<BTreeMap<String, CastMember>, ComposeError> {
    let mut cast: BTreeMap<String, CastMember> = BTreeMap::new();
    for seed in seeds {
        let member = cast
            .entry(seed.profile.id.clone())
            .or_insert_with(|| CastMember {
                profile: seed.profile.clone(),
                rules: Vec::new(),
            });
        if member.profile != seed.profile {
            return Err(ComposeError::EntityConflict(format!(
                "npc {}",
                seed.profile.id
            )));
        }
        for rule in &seed.rules {
            if let Some(other) = member
                .rules
                .iter()
                .find(|r| !r.trigger.keywords.is_disjoint(&rule.trigger.keywords))
            {
                return Err(ComposeError::OverlappingTriggers {
                    npc: seed.profile.id.clone(),
                    keywords: other
                        .trigger
                        .keywords
                        .intersection(&rule.trigger.keywords)
                        .cloned()
                        .collect(),
                });
            }
            member.rules.push(rule.clone());
        }
    }
    for clue in clues {
        if let Custodian::Npc { npc, .. } = &clue.custodian {
            if !cast.contains_key(npc) {
                return Err(ComposeError::UnknownCustodian {
                    clue: clue.clue_id.clone(),
                    npc: npc.clone(),
                });
            }
        }
    }
    Ok(cast)
}

type Files = BTreeMap<String, FileEntry>;
type Data = BTreeMap<String, BTreeMap<String, Record>>;

/// Union of task files and rows; identical duplicates collapse, differing
/// ones are a conflict.
fn merge_entities(tasks: &[TaskInstance]) -> Result<(Files, Data), ComposeError> {
    let mut files = Files::new();
    let mut data = Data::new();
    for t in tasks {
        for (path, entry) in &t.world.files {
            match files.get(path) {
                Some(e) if e != entry => return Err(ComposeError::EntityConflict(path.clone())),
                Some(_) => {}
                None => {
                    files.insert(path.clone(), entry.clone());
                }
            }
        }
        for (table, rows) in &t.world.tables {
            let target = data.entry(table.clone()).or_default();
            for (key, record) in rows {
                match target.get(key) {
                    Some(r) if r != record => {
                        return Err(ComposeError::EntityConflict(format!("{table}/{key}")));
                    }
                    Some(_) => {}
                    None => {
                        target.insert(key.clone(), record.clone());
                    }
                }
            }
        }
    }
    Ok((files, data))
}

fn build_timeline(tasks: &[TaskInstance]) -> Vec<TimelineEntry> {
    let mut out = Vec::new();
    for t in tasks {
        for m in &t.world.meetings {
            out.push(TimelineEntry {
                at: m.interval.start,
                event: EventBody::MeetingStart {
                    meeting_id: m.meeting_id.clone(),
                },
            });
            out.push(TimelineEntry {
                at: m.interval.end,
                event: EventBody::MeetingEnd {
                    meeting_id: m.meeting_id.clone(),
                },
            });
        }
        if let Reveal::AtTime { at } = t.reveal {
            out.push(TimelineEntry {
                at,
                event: EventBody::TaskRelease {
                    task_id: t.task_id.clone(),
                },
            });
        }
        for msg in &t.world.messages {
            out.push(TimelineEntry {
                at: msg.sent_at,
                event: EventBody::MessageArrival {
                    message: msg.clone(),
                },
            });
        }
    }
    for t in tasks {
        if let Some(at) = t.deadline {
            out.push(TimelineEntry {
                at,
                event: EventBody::DeadlinePassed {
                    task_id: t.task_id.clone(),
                },
            });
        }
    }
    out.sort_by_key(|e| e.at);
    out
}

impl Scenario {
    pub fn task(&self, task_id: &str) -> Option<&TaskInstance> {
        self.hidden.tasks.iter().find(|t| t.task_id == task_id)
    }

    pub fn clues(&self) -> impl Iterator<Item = &Clue> {
        self.hidden.tasks.iter().flat_map(|t| t.clues.iter())
    }

    pub fn meetings(&self) -> impl Iterator<Item = &Meeting> {
        self.hidden
            .tasks
            .iter()
            .flat_map(|t| t.world.meetings.iter())
    }

    /// Every entity name in the scenario, grouped by namespace.
    pub fn entity_names(&self) -> BTreeMap<&'static str, Vec<String>> {
        let mut out: BTreeMap<&'static str, Vec<String>> = BTreeMap::new();
        let mut npcs = vec![self.persona.name.clone()];
        npcs.extend(
            self.hidden
                .npc_cast
                .values()
                .map(|m| m.profile.name.clone()),
        );
        out.insert("npcs", npcs);
        out.insert("tables", self.hidden.data.keys().cloned().collect());
        out.insert("files", self.hidden.files.keys().cloned().collect());
        out.insert(
            "meetings",
            self.meetings().map(|m| m.meeting_id.clone()).collect(),
        );
        out.insert(
            "tasks",
            self.hidden
                .tasks
                .iter()
                .map(|t| t.task_id.clone())
                .collect(),
        );
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        canonical::encode_envelope(SCENARIO_FORMAT, SCHEMA_VERSION, self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        canonical::decode_envelope(bytes, SCENARIO_FORMAT, SCHEMA_VERSION)
    }

    pub fn initial_world(&self) -> WorldState {
        WorldState::from_scenario(self)
    }

    pub fn agent_view(&self) -> AgentView {
        let w = self.initial_world();
        AgentView {
            schema_version: SCHEMA_VERSION,
            scenario_id: self.scenario_id.clone(),
            date: self.date,
            workday: self.workday,
            persona: self.persona.clone(),
            contacts: w.contacts(),
            tasks: w.released_briefs(),
            tools: tools::catalog(),
            databases: w.databases(),
        }
    }
}

/// Agent-facing form of a scenario: no clues, no hidden tasks, no seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentView {
    pub schema_version: u32,
    pub scenario_id: String,
    pub date: NaiveDate,
    pub workday: Interval,
    pub persona: Persona,
    pub contacts: Vec<Contact>,
    pub tasks: Vec<TaskBrief>,
    pub tools: Vec<ToolSpec>,
    pub databases: Vec<String>,
}

impl WorldState {
    pub fn from_scenario(s: &Scenario) -> WorldState {
        let mut w = WorldState {
            clock: s.workday.start,
            workday: s.workday,
            agent: AgentState {
                persona: s.persona.clone(),
                inbox: Vec::new(),
                current_activity: Activity::Idle,
                notes: String::new(),
            },
            npcs: s
                .hidden
                .npc_cast
                .iter()
                .map(|(id, m)| {
                    (
                        id.clone(),
                        NpcState::scripted(m.profile.clone(), m.rules.clone()),
                    )
                })
                .collect(),
            files: s.hidden.files.clone(),
            datastore: s
                .hidden
                .data
                .iter()
                .map(|(k, rows)| (k.clone(), Table { rows: rows.clone() }))
                .collect(),
            calendar: s.meetings().cloned().collect(),
            pending_events: Vec::new(),
            event_log: Vec::new(),
            revealed_clues: BTreeSet::new(),
            message_log: Vec::new(),
            tasks: s
                .hidden
                .tasks
                .iter()
                .map(|t| {
                    (
                        t.task_id.clone(),
                        TaskBrief {
                            task_id: t.task_id.clone(),
                            description: t.description.clone(),
                            deadline: t.deadline,
                            priority: t.priority,
                        },
                    )
                })
                .collect(),
            released_tasks: s
                .hidden
                .tasks
                .iter()
                .filter(|t| t.reveal == Reveal::AtStart)
                .map(|t| t.task_id.clone())
                .collect(),
            meeting_reveals: s.hidden.meeting_reveals.clone(),
            clue_index: s
                .clues()
                .map(|c| (c.clue_id.clone(), c.custodian.clone()))
                .collect(),
            submissions: BTreeMap::new(),
            next_event_seq: 0,
        };
        for e in &s.hidden.timeline {
            w.push_event(e.at, e.event.clone());
        }
        w
    }
}

/// What the agent is shown when an episode starts.
pub fn initial_observation(s: &Scenario) -> Observation {
    let w = s.initial_world();
    Observation {
        persona: Some(s.persona.clone()),
        workday: Some(s.workday),
        tasks: w.released_briefs(),
        tools: tools::catalog(),
        contacts: w.contacts(),
        databases: w.databases(),
        ..Observation::at(w.clock)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub benchmark_id: String,
    pub seed: u64,
    pub k_min: usize,
    pub k_max: usize,
    pub scenarios: Vec<Scenario>,
}

pub const DEFAULT_SCENARIOS: usize = 50;
pub const DEFAULT_K_MIN: usize = 2;
pub const DEFAULT_K_MAX: usize = 6;

/// Task count and rule picks (ids, sorted) of scenario `index`.
pub fn scenario_plan(
    ruleset: &[&MetaTaskRule],
    seed: u64,
    index: usize,
    k_min: usize,
    k_max: usize,
) -> Vec<String> {
    let mut s = Stream::derive(seed, &[Tag::from("scenario"), Tag::from(index as u64)]);
    let k = s.range_inclusive(k_min as i64, k_max as i64) as usize;
    let mut ids: Vec<String> = (0..k)
        .map(|_| {
            ruleset[s.below(ruleset.len() as u64) as usize]
                .rule_id
                .clone()
        })
        .collect();
    ids.sort();
    ids
}

pub fn scenario_seed(seed: u64, index: usize) -> u64 {
    derive_key(
        seed,
        &[
            Tag::from("scenario"),
            Tag::from(index as u64),
            Tag::from("seed"),
        ],
    )
}

pub fn build_benchmark(
    ruleset: &[MetaTaskRule],
    n: usize,
    k_min: usize,
    k_max: usize,
    seed: u64,
) -> Result<Benchmark, ComposeError> {
    if n == 0 {
        return Err(ComposeError::EmptyBenchmark);
    }
    if ruleset.is_empty() {
        return Err(ComposeError::EmptyRuleset);
    }
    if k_min == 0 || k_min > k_max || k_max > MAX_TASKS {
        return Err(ComposeError::TaskRange(k_min, k_max));
    }
    let mut sorted: Vec<&MetaTaskRule> = ruleset.iter().collect();
    sorted.sort_by(|a, b| a.rule_id.cmp(&b.rule_id));
    sorted.dedup_by(|a, b| a.rule_id == b.rule_id);
    let benchmark_id = format!("bench-{seed}");
    let scenarios = (0..n)
        .into_par_iter()
        .map(|i| {
            let ids = scenario_plan(&sorted, seed, i, k_min, k_max);
            let rules: Vec<MetaTaskRule> = ids
                .iter()
                .map(|id| {
                    (*sorted
                        .iter()
                        .find(|r| &r.rule_id == id)
                        .expect("picked from ruleset"))
                    .clone()
                })
                .collect();
            let mut sc = compose(&rules, scenario_seed(seed, i))?;
            sc.scenario_id = format!("{benchmark_id}-s{i:02}");
            Ok(sc)
        })
        .collect::<Result<Vec<_>, ComposeError>>()?;
    Ok(Benchmark {
        benchmark_id,
        seed,
        k_min,
        k_max,
        scenarios,
    })
}

impl Benchmark {
    pub fn to_bytes(&self) -> Vec<u8> {
        canonical::encode_envelope(BENCHMARK_FORMAT, SCHEMA_VERSION, self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        canonical::decode_envelope(bytes, BENCHMARK_FORMAT, SCHEMA_VERSION)
    }

    pub fn scenario(&self, id: &str) -> Option<&Scenario> {
        self.scenarios.iter().find(|s| s.scenario_id == id)
    }
}
