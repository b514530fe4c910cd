//! Episode loop, benchmark runner, two-day runs and replay.

pub mod agents;
pub mod backend;
pub mod history;
pub mod model;
pub mod parse;
pub mod prompt;

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::canonical;
use crate::error::ComposeError;
use crate::metatask::MetaTaskRule;
use crate::rng::{derive_key, Tag};
use crate::scenario::{compose, Benchmark, Scenario};
use crate::session::{Session, SessionError};
use crate::time::SimTime;
use crate::trajectory::Trajectory;
use crate::verifier::{BenchmarkReport, EpisodeReport, Fraction};
use crate::world::{Observation, ToolCall};
use agents::{Agent, EpisodeStart, RandomAgent, Reply, ScriptAgent, Variant};
use backend::{Backend, MockBackend, RemoteBackend, ScriptedBackend};
use model::ModelAgent;
use prompt::{build_system_prompt, reflect, ExperienceRecord};

pub const DEFAULT_STEP_BUDGET: usize = 200;
pub const LOG_FORMAT: &str = "worksim.episode_log";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error("episode log: {0}")]
    Log(String),
    #[error("model backend is not configured: {0}")]
    Backend(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Stopped,
    AllSubmitted,
    StepBudget,
    WorkdayOver,
    Aborted,
}

/// One line of the JSONL episode log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Header {
        format: String,
        version: u32,
        scenario_id: String,
        agent: String,
        day: u32,
    },
    Hint {
        tier: u8,
        text: String,
        at: SimTime,
    },
    Step {
        step: usize,
        clock: SimTime,
        thought: String,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        unparseable: bool,
        tool_calls: Vec<LoggedCall>,
    },
    End {
        reason: EndReason,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        aborted: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedCall {
    #[serde(rename = "ID")]
    pub id: String,
    #[serde(rename = "Tool Name")]
    pub tool_name: String,
    #[serde(rename = "Arguments")]
    pub arguments: BTreeMap<String, Value>,
    #[serde(rename = "Execute Results")]
    pub execute_results: String,
    pub status: crate::tools::ToolStatus,
    pub issued_at: SimTime,
    pub clock_after: SimTime,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub records: Vec<LogRecord>,
}

impl EpisodeLog {
    pub fn from_trajectory(
        scenario_id: &str,
        agent: &str,
        day: u32,
        t: &Trajectory,
        end: EndReason,
        aborted: Option<String>,
    ) -> Self {
        let mut records = vec![LogRecord::Header {
            format: LOG_FORMAT.into(),
            version: LOG_VERSION,
            scenario_id: scenario_id.into(),
            agent: agent.into(),
            day,
        }];
        let mut hints = t.hints.iter().peekable();
        for step in &t.steps {
            while let Some(h) = hints.next_if(|h| h.after_step <= step.index) {
                records.push(LogRecord::Hint {
                    tier: h.tier,
                    text: h.text.clone(),
                    at: h.injected_at,
                });
            }
            records.push(LogRecord::Step {
                step: step.index,
                clock: step.clock,
                thought: step.thought.clone(),
                unparseable: step.unparseable,
                tool_calls: step
                    .actions
                    .iter()
                    .map(|a| LoggedCall {
                        id: a.result.call_id.clone(),
                        tool_name: a.call.name.clone(),
                        arguments: a.call.arguments.clone(),
                        execute_results: a.result.payload.clone(),
                        status: a.result.status,
                        issued_at: a.result.issued_at,
                        clock_after: a.result.clock_after,
                    })
                    .collect(),
            });
        }
        for h in hints {
            records.push(LogRecord::Hint {
                tier: h.tier,
                text: h.text.clone(),
                at: h.injected_at,
            });
        }
        records.push(LogRecord::End {
            reason: end,
            aborted,
        });
        EpisodeLog { records }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&canonical::to_line(r));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, HarnessError> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| {
                serde_json::from_str(l)
                    .map_err(|e| HarnessError::Log(format!("line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<LogRecord>, _>>()?;
        match records.first() {
            Some(LogRecord::Header {
                format, version, ..
            }) if format == LOG_FORMAT && *version == LOG_VERSION => {}
            _ => return Err(HarnessError::Log("missing or unsupported header".into())),
        }
        Ok(EpisodeLog { records })
    }
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub report: EpisodeReport,
    pub log: EpisodeLog,
    pub trajectory: Trajectory,
    pub end: EndReason,
    pub system_prompt: String,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub step_budget: Option<usize>,
    pub experiences: Vec<ExperienceRecord>,
    /// Mentor hint injected before the first turn; tier 0 means none.
    pub hint_tier: u8,
}

/// The mentor hint of `tier` for the first task that carries hints.
pub fn tier_hint(scenario: &Scenario, tier: u8) -> Option<&str> {
    let i = usize::from(tier).checked_sub(1)?;
    scenario
        .hidden
        .tasks
        .iter()
        .find_map(|t| t.hints.get(i))
        .map(String::as_str)
}

/// Runs the prompt, act, observe loop until the agent stops or a limit hits.
pub fn run_episode(
    agent: &mut dyn Agent,
    session: &mut Session,
    opts: &RunOptions,
) -> Result<Episode, HarnessError> {
    let budget = opts.step_budget.unwrap_or(DEFAULT_STEP_BUDGET);
    let scenario = session.scenario.clone();
    let first = session.initial_observation();
    let system_prompt = build_system_prompt(&first, &scenario.persona, &opts.experiences);
    agent.begin(&EpisodeStart {
        scenario: &scenario,
        observation: &first,
        system_prompt: &system_prompt,
        experiences: &opts.experiences,
    });
    session.agent = agent.name();
    if let Some(text) = tier_hint(&scenario, opts.hint_tier) {
        session.inject_hint(opts.hint_tier, text)?;
    }
    let mut last: Vec<Observation> = Vec::new();
    let mut aborted = None;
    let end = loop {
        if session.trajectory.steps.len() >= budget {
            break EndReason::StepBudget;
        }
        if session.clock() >= scenario.workday.end {
            break EndReason::WorkdayOver;
        }
        if scenario
            .hidden
            .tasks
            .iter()
            .all(|t| session.state.submissions.contains_key(&t.task_id))
        {
            break EndReason::AllSubmitted;
        }
        let reply = match agent.next(&last) {
            Ok(Reply::Unparseable { reason, .. }) => agent.retry(&reason),
            other => other,
        };
        let reply = match reply {
            Ok(r) => r,
            Err(e) => {
                aborted = Some(e.to_string());
                break EndReason::Aborted;
            }
        };
        last = match reply {
            Reply::Act { thought, calls } => session.step(&thought, &calls)?,
            Reply::Think { thought } => session.step(&thought, &[])?,
            Reply::Stop { .. } => break EndReason::Stopped,
            Reply::Unparseable { text, .. } => {
                session.wasted_step(&text)?;
                Vec::new()
            }
        };
    };
    let report = session.finalize_with(aborted.clone())?;
    let log = EpisodeLog::from_trajectory(
        &scenario.scenario_id,
        &session.agent,
        session.day,
        &session.trajectory,
        end,
        aborted,
    );
    Ok(Episode {
        report,
        log,
        trajectory: session.trajectory.clone(),
        end,
        system_prompt,
    })
}

/// Re-executes a logged episode and returns its report.
pub fn replay(scenario: Arc<Scenario>, log: &EpisodeLog) -> Result<EpisodeReport, HarnessError> {
    let Some(LogRecord::Header {
        agent,
        day,
        scenario_id,
        ..
    }) = log.records.first()
    else {
        return Err(HarnessError::Log("missing header".into()));
    };
    if *scenario_id != scenario.scenario_id {
        return Err(HarnessError::Log(format!(
            "log is for {scenario_id}, not {}",
            scenario.scenario_id
        )));
    }
    let (session, _) = Session::new("replay", scenario);
    let mut session = session.with_agent(agent, *day);
    let mut aborted = None;
    for r in &log.records[1..] {
        match r {
            LogRecord::Header { .. } => return Err(HarnessError::Log("second header".into())),
            LogRecord::Hint { tier, text, .. } => session.inject_hint(*tier, text)?,
            LogRecord::Step {
                thought,
                unparseable,
                tool_calls,
                ..
            } => {
                if *unparseable {
                    session.wasted_step(thought)?;
                } else {
                    let calls: Vec<ToolCall> = tool_calls
                        .iter()
                        .map(|c| ToolCall {
                            id: Some(c.id.clone()),
                            name: c.tool_name.clone(),
                            arguments: c.arguments.clone(),
                        })
                        .collect();
                    session.step(thought, &calls)?;
                }
            }
            LogRecord::End { aborted: a, .. } => aborted = a.clone(),
        }
    }
    Ok(session.finalize_with(aborted)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BackendConfig {
    /// Replays the oracle's calls as model responses.
    Scripted,
    Mock {
        #[serde(default)]
        table: BTreeMap<String, String>,
    },
    /// Endpoint, key and model fall back to the environment.
    Remote {
        #[serde(default)]
        endpoint: Option<String>,
        #[serde(default)]
        model: Option<String>,
        #[serde(default)]
        retries: Option<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentKind {
    Oracle,
    NoShow,
    Random {
        #[serde(default)]
        seed: u64,
    },
    ExperienceFollowing,
    HintFollowing,
    Model {
        backend: BackendConfig,
        #[serde(default = "default_threshold")]
        history_threshold: usize,
    },
}

fn default_threshold() -> usize {
    history::DEFAULT_THRESHOLD_TOKENS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    #[serde(flatten)]
    pub kind: AgentKind,
    #[serde(default = "default_budget")]
    pub step_budget: usize,
}

fn default_budget() -> usize {
    DEFAULT_STEP_BUDGET
}

impl AgentConfig {
    pub fn new(kind: AgentKind) -> Self {
        AgentConfig {
            kind,
            step_budget: DEFAULT_STEP_BUDGET,
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            AgentKind::Oracle => "oracle".into(),
            AgentKind::NoShow => "no_show".into(),
            AgentKind::Random { seed } => format!("random-{seed}"),
            AgentKind::ExperienceFollowing => "experience_following".into(),
            AgentKind::HintFollowing => "hint_following".into(),
            AgentKind::Model { backend, .. } => match backend {
                BackendConfig::Scripted => "model-scripted".into(),
                BackendConfig::Mock { .. } => "model-mock".into(),
                BackendConfig::Remote { .. } => "model-remote".into(),
            },
        }
    }

    /// A fresh agent for `scenario`.
    pub fn build(&self, scenario: &Scenario) -> Result<Box<dyn Agent>, HarnessError> {
        Ok(match &self.kind {
            AgentKind::Oracle => Box::new(ScriptAgent::new(Variant::Oracle)),
            AgentKind::NoShow => Box::new(ScriptAgent::new(Variant::NoShow)),
            AgentKind::ExperienceFollowing => {
                Box::new(ScriptAgent::new(Variant::ExperienceFollowing))
            }
            AgentKind::HintFollowing => Box::new(ScriptAgent::new(Variant::HintFollowing)),
            AgentKind::Random { seed } => Box::new(RandomAgent::new(derive_key(
                *seed,
                &[Tag::from(scenario.scenario_id.as_str())],
            ))),
            AgentKind::Model {
                backend,
                history_threshold,
            } => {
                let b: Box<dyn Backend> = match backend {
                    BackendConfig::Scripted => {
                        Box::new(ScriptedBackend::from_calls(&oracle_calls(scenario)?))
                    }
                    BackendConfig::Mock { table } => Box::new(MockBackend {
                        table: table.clone(),
                    }),
                    BackendConfig::Remote {
                        endpoint,
                        model,
                        retries,
                    } => {
                        let mut r = match endpoint {
                            Some(e) => RemoteBackend::new(
                                e,
                                std::env::var(backend::KEY_VAR).ok(),
                                model.as_deref().unwrap_or("default"),
                            ),
                            None => RemoteBackend::from_env().ok_or_else(|| {
                                HarnessError::Backend(format!("set {}", backend::ENDPOINT_VAR))
                            })?,
                        };
                        if let Some(m) = model {
                            r.model = m.clone();
                        }
                        if let Some(n) = retries {
                            r.retries = *n;
                        }
                        Box::new(r)
                    }
                };
                Box::new(ModelAgent::new(&self.label(), b, *history_threshold))
            }
        })
    }
}

/// The calls the oracle agent makes on `scenario`, in order.
pub fn oracle_calls(scenario: &Scenario) -> Result<Vec<ToolCall>, HarnessError> {
    let (mut session, _) = Session::new("oracle-plan", Arc::new(scenario.clone()));
    let mut agent = ScriptAgent::oracle();
    let ep = run_episode(&mut agent, &mut session, &RunOptions::default())?;
    Ok(ep
        .trajectory
        .actions()
        .map(|a| ToolCall {
            id: None,
            ..a.call.clone()
        })
        .collect())
}

/// Runs one fresh session of `scenario` with the configured agent.
pub fn run_scenario(
    scenario: Arc<Scenario>,
    config: &AgentConfig,
    day: u32,
    opts: &RunOptions,
) -> Result<Episode, HarnessError> {
    let mut agent = config.build(&scenario)?;
    let (session, _) = Session::new(&format!("{}-d{day}", scenario.scenario_id), scenario);
    let mut session = session.with_agent(&agent.name(), day);
    let opts = RunOptions {
        step_budget: opts.step_budget.or(Some(config.step_budget)),
        experiences: opts.experiences.clone(),
        hint_tier: opts.hint_tier,
    };
    run_episode(agent.as_mut(), &mut session, &opts)
}

pub struct BenchmarkRun {
    pub report: BenchmarkReport,
    pub logs: Vec<EpisodeLog>,
}

/// Runs every scenario on up to `parallelism` threads; results keep
/// scenario order. A failing episode is recorded as aborted.
pub fn run_benchmark(
    benchmark: &Benchmark,
    config: &AgentConfig,
    parallelism: usize,
) -> BenchmarkRun {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .expect("thread pool");
    let results: Vec<(EpisodeReport, EpisodeLog)> = pool.install(|| {
        benchmark
            .scenarios
            .par_iter()
            .map(|s| {
                let sc = Arc::new(s.clone());
                match run_scenario(sc.clone(), config, 1, &RunOptions::default()) {
                    Ok(ep) => (ep.report, ep.log),
                    Err(e) => aborted_episode(&sc, &config.label(), &e.to_string()),
                }
            })
            .collect()
    });
    let (episodes, logs): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    BenchmarkRun {
        report: BenchmarkReport::new(&benchmark.benchmark_id, &config.label(), episodes),
        logs,
    }
}

fn aborted_episode(
    scenario: &Arc<Scenario>,
    agent: &str,
    why: &str,
) -> (EpisodeReport, EpisodeLog) {
    let (mut session, _) = Session::new("aborted", scenario.clone());
    session.agent = agent.to_string();
    let report = session
        .finalize_with(Some(why.to_string()))
        .expect("composed scenarios have checkpoints");
    let log = EpisodeLog::from_trajectory(
        &scenario.scenario_id,
        agent,
        1,
        &session.trajectory,
        EndReason::Aborted,
        Some(why.to_string()),
    );
    (report, log)
}

/// Turns a day's feedback into experiences for the next day.
pub trait Reflector {
    fn reflect(&self, report: &EpisodeReport, trajectory: &Trajectory) -> Vec<ExperienceRecord>;
}

/// One experience per feedback line, verbatim.
pub struct VerbatimReflector;

impl Reflector for VerbatimReflector {
    fn reflect(&self, report: &EpisodeReport, _: &Trajectory) -> Vec<ExperienceRecord> {
        reflect(&report.feedback, |task| {
            report
                .tasks
                .iter()
                .find(|t| t.task_id == task)
                .map(|t| t.rule_id.clone())
        })
    }
}

pub struct TwoDay {
    pub day1: Episode,
    pub day2: Episode,
    pub experiences: Vec<ExperienceRecord>,
    pub delta: Fraction,
}

/// Same rules on two days with different seeds; day two sees day one's lessons.
pub fn run_two_day(
    rules: &[MetaTaskRule],
    seeds: (u64, u64),
    config: &AgentConfig,
    reflector: &dyn Reflector,
) -> Result<TwoDay, HarnessError> {
    if seeds.0 == seeds.1 {
        return Err(HarnessError::Log(
            "the two days need different seeds".into(),
        ));
    }
    let d1 = Arc::new(compose(rules, seeds.0)?);
    let d2 = Arc::new(compose(rules, seeds.1)?);
    let day1 = run_scenario(d1, config, 1, &RunOptions::default())?;
    let experiences: Vec<ExperienceRecord> = reflector
        .reflect(&day1.report, &day1.trajectory)
        .into_iter()
        .map(|mut e| {
            e.day = 1;
            e
        })
        .collect();
    let day2 = run_scenario(
        d2,
        config,
        2,
        &RunOptions {
            step_budget: None,
            experiences: experiences.clone(),
            hint_tier: 0,
        },
    )?;
    let delta = day2.report.score - day1.report.score;
    Ok(TwoDay {
        day1,
        day2,
        experiences,
        delta,
    })
}
