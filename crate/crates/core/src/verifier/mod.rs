//! Checkpoint evaluation, scenario score, metrics and feedback.

pub mod checkpoint;
pub mod submission;

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::error::{DecodeError, ScoreError};
use crate::metatask::Difficulty;
use crate::npc::token_set;
use crate::scenario::Scenario;
use crate::tools::Effect;
use crate::trajectory::{Counters, Trajectory};
use crate::world::{normalize_path, Submission, TaskId, WorldState};
use checkpoint::{Checkpoint, Predicate};

pub const REPORT_FORMAT: &str = "worksim.episode";
pub const BENCHMARK_REPORT_FORMAT: &str = "worksim.benchmark_report";
pub const REPORT_VERSION: u32 = 1;

pub type Fraction = Ratio<i64>;

/// Serializes a fraction as `"n/d"`.
pub mod fraction_text {
    use super::Fraction;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(f: &Fraction, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}/{}", f.numer(), f.denom()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Fraction, D::Error> {
        let text = String::deserialize(d)?;
        let (n, den) = text
            .split_once('/')
            .ok_or_else(|| D::Error::custom("expected n/d"))?;
        let n: i64 = n.trim().parse().map_err(D::Error::custom)?;
        let den: i64 = den.trim().parse().map_err(D::Error::custom)?;
        if den == 0 {
            return Err(D::Error::custom("zero denominator"));
        }
        Ok(Fraction::new(n, den))
    }
}

/// Two-decimal rendering, rounding half away from zero.
pub fn two_decimals(f: &Fraction) -> String {
    let h = (f * 100i64).round().to_integer();
    let sign = if h < 0 { "-" } else { "" };
    format!("{sign}{}.{:02}", h.abs() / 100, h.abs() % 100)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pending,
    Completed,
    Missed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointStatus {
    pub checkpoint_id: String,
    pub task_id: TaskId,
    pub kind: String,
    pub description: String,
    pub feedback: String,
    pub status: Status,
}

fn latest<'a>(state: &'a WorldState, task: &str) -> Option<&'a Submission> {
    state.submissions.get(task).and_then(|s| s.last())
}

fn has_keywords(message: &str, keywords: &std::collections::BTreeSet<String>) -> bool {
    let tokens = token_set(message);
    keywords.iter().all(|k| token_set(k).is_subset(&tokens))
}

/// Judges one predicate against the finished episode.
pub fn holds(cp: &Checkpoint, state: &WorldState, trajectory: &Trajectory) -> bool {
    match &cp.predicate {
        Predicate::NpcAsked { npc, keywords } => trajectory.effects().any(|e| {
            matches!(e, Effect::NpcAsked { npc: n, message } if n == npc && has_keywords(message, keywords))
        }),
        Predicate::ClueRevealed { clue } => state.revealed_clues.contains(clue),
        Predicate::FileRead { path } => {
            let want = normalize_path(path);
            trajectory
                .effects()
                .any(|e| matches!(e, Effect::FileRead { path: p } if normalize_path(p) == want))
        }
        Predicate::MessageSent { to, keywords } => trajectory.effects().any(|e| {
            matches!(e, Effect::MessageSent { to: t, message } if t == to && has_keywords(message, keywords))
        }),
        Predicate::MeetingAttended { meeting_id, min_minutes } => state
            .meeting(meeting_id)
            .is_some_and(|m| m.attended_minutes() >= *min_minutes),
        Predicate::SubmissionMatches { matcher } => {
            latest(state, &cp.task_id).is_some_and(|s| matcher.matches(&s.content))
        }
        Predicate::SubmissionOptimal { oracle, tolerance } => {
            latest(state, &cp.task_id).is_some_and(|s| oracle.satisfied_by(&s.content, *tolerance))
        }
        Predicate::DeadlineMet { deadline, form } => {
            latest(state, &cp.task_id).is_some_and(|s| s.at <= *deadline && form.accepts(&s.content))
        }
    }
}

/// Statuses of every checkpoint of the scenario, in task then checkpoint order.
pub fn evaluate(
    scenario: &Scenario,
    state: &WorldState,
    trajectory: &Trajectory,
) -> Vec<CheckpointStatus> {
    scenario
        .hidden
        .tasks
        .iter()
        .flat_map(|t| t.checkpoints.iter())
        .map(|cp| CheckpointStatus {
            checkpoint_id: cp.checkpoint_id.clone(),
            task_id: cp.task_id.clone(),
            kind: cp.predicate.kind().to_string(),
            description: cp.description.clone(),
            feedback: cp.feedback.clone(),
            status: if holds(cp, state, trajectory) {
                Status::Completed
            } else {
                Status::Missed
            },
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub completed: usize,
    pub total: usize,
}

/// Per-task counts in first-appearance order.
pub fn tally(statuses: &[CheckpointStatus]) -> Vec<(TaskId, Tally)> {
    let mut out: Vec<(TaskId, Tally)> = Vec::new();
    for s in statuses {
        let i = match out.iter().position(|(t, _)| *t == s.task_id) {
            Some(i) => i,
            None => {
                out.push((
                    s.task_id.clone(),
                    Tally {
                        completed: 0,
                        total: 0,
                    },
                ));
                out.len() - 1
            }
        };
        out[i].1.total += 1;
        if s.status == Status::Completed {
            out[i].1.completed += 1;
        }
    }
    out
}

/// Mean over tasks of the completed fraction of checkpoints.
pub fn score(tasks: &[Tally]) -> Result<Fraction, ScoreError> {
    if tasks.is_empty() {
        return Err(ScoreError::NoTasks);
    }
    let mut sum = Fraction::from_integer(0);
    for (i, t) in tasks.iter().enumerate() {
        if t.total == 0 {
            return Err(ScoreError::EmptyTask(format!("task #{}", i + 1)));
        }
        sum += Fraction::new(t.completed as i64, t.total as i64);
    }
    Ok(sum / tasks.len() as i64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissedCheckpoint {
    pub checkpoint_id: String,
    pub description: String,
    pub feedback: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackBundle {
    pub scenario_id: String,
    pub day: u32,
    pub missed: Vec<MissedCheckpoint>,
}

impl FeedbackBundle {
    pub fn lines(&self) -> Vec<&str> {
        self.missed.iter().map(|m| m.feedback.as_str()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.missed.is_empty()
    }

    /// The daily report block shown to the agent.
    pub fn render(&self) -> String {
        let mut out = String::from("Incompleted Checkpoints & Feedback\n");
        if self.missed.is_empty() {
            out.push_str("(none)\n");
        }
        for (i, m) in self.missed.iter().enumerate() {
            out.push_str(&format!(
                "{}. {}\n   Feedback: {}\n",
                i + 1,
                m.description,
                m.feedback
            ));
        }
        out
    }
}

pub fn feedback(scenario_id: &str, day: u32, statuses: &[CheckpointStatus]) -> FeedbackBundle {
    FeedbackBundle {
        scenario_id: scenario_id.to_string(),
        day,
        missed: statuses
            .iter()
            .filter(|s| s.status == Status::Missed)
            .map(|s| MissedCheckpoint {
                checkpoint_id: s.checkpoint_id.clone(),
                description: s.description.clone(),
                feedback: s.feedback.clone(),
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task_id: TaskId,
    pub rule_id: String,
    pub difficulty: Difficulty,
    pub completed: usize,
    pub total: usize,
}

impl TaskOutcome {
    pub fn success(&self) -> bool {
        self.completed == self.total
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub scenario_id: String,
    pub agent: String,
    pub day: u32,
    pub checkpoints: Vec<CheckpointStatus>,
    pub tasks: Vec<TaskOutcome>,
    #[serde(with = "fraction_text")]
    pub score: Fraction,
    pub score_display: String,
    pub counters: Counters,
    pub feedback: FeedbackBundle,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
}

impl EpisodeReport {
    pub fn build(
        scenario: &Scenario,
        state: &WorldState,
        trajectory: &Trajectory,
        agent: &str,
        day: u32,
        aborted: Option<String>,
    ) -> Result<Self, ScoreError> {
        let checkpoints = evaluate(scenario, state, trajectory);
        let tallies = tally(&checkpoints);
        for t in &scenario.hidden.tasks {
            if t.checkpoints.is_empty() {
                return Err(ScoreError::EmptyTask(t.task_id.clone()));
            }
        }
        let score = score(&tallies.iter().map(|(_, t)| *t).collect::<Vec<_>>())?;
        let tasks = tallies
            .iter()
            .map(|(id, t)| {
                let inst = scenario.task(id).expect("tallied from scenario tasks");
                TaskOutcome {
                    task_id: id.clone(),
                    rule_id: inst.rule_id.clone(),
                    difficulty: inst.difficulty,
                    completed: t.completed,
                    total: t.total,
                }
            })
            .collect();
        Ok(EpisodeReport {
            scenario_id: scenario.scenario_id.clone(),
            agent: agent.to_string(),
            day,
            feedback: feedback(&scenario.scenario_id, day, &checkpoints),
            checkpoints,
            tasks,
            score_display: two_decimals(&score),
            score,
            counters: trajectory.counters,
            aborted,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        canonical::encode_envelope(REPORT_FORMAT, REPORT_VERSION, self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        canonical::decode_envelope(bytes, REPORT_FORMAT, REPORT_VERSION)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub scenarios: usize,
    pub tasks: usize,
    pub successful_tasks: usize,
    #[serde(with = "fraction_text")]
    pub success_rate: Fraction,
    #[serde(with = "fraction_text")]
    pub checkpoint_score: Fraction,
    #[serde(with = "fraction_text")]
    pub avg_steps: Fraction,
    #[serde(with = "fraction_text")]
    pub avg_tool_calls: Fraction,
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SR {}  CS {}  steps {}  tool calls {}  ({} scenarios, {}/{} tasks)",
            two_decimals(&self.success_rate),
            two_decimals(&self.checkpoint_score),
            two_decimals(&self.avg_steps),
            two_decimals(&self.avg_tool_calls),
            self.scenarios,
            self.successful_tasks,
            self.tasks
        )
    }
}

/// Metrics over the tasks accepted by `keep`; scenarios without such tasks
/// are left out. `None` when nothing remains.
pub fn metrics_where(
    reports: &[EpisodeReport],
    keep: impl Fn(&TaskOutcome) -> bool,
) -> Option<Metrics> {
    let mut scenarios = 0i64;
    let mut tasks = 0usize;
    let mut successes = 0usize;
    let mut cs = Fraction::from_integer(0);
    let mut steps = 0i64;
    let mut calls = 0i64;
    for r in reports {
        let kept: Vec<&TaskOutcome> = r.tasks.iter().filter(|t| keep(t)).collect();
        if kept.is_empty() {
            continue;
        }
        scenarios += 1;
        tasks += kept.len();
        successes += kept.iter().filter(|t| t.success()).count();
        let tallies: Vec<Tally> = kept
            .iter()
            .map(|t| Tally {
                completed: t.completed,
                total: t.total,
            })
            .collect();
        cs += score(&tallies).unwrap_or_default();
        steps += r.counters.steps as i64;
        calls += r.counters.tool_calls as i64;
    }
    if scenarios == 0 {
        return None;
    }
    Some(Metrics {
        scenarios: scenarios as usize,
        tasks,
        successful_tasks: successes,
        success_rate: Fraction::new(successes as i64, tasks as i64),
        checkpoint_score: cs / scenarios,
        avg_steps: Fraction::new(steps, scenarios),
        avg_tool_calls: Fraction::new(calls, scenarios),
    })
}

pub fn metrics(reports: &[EpisodeReport]) -> Option<Metrics> {
    metrics_where(reports, |_| true)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strata {
    pub easy: Option<Metrics>,
    pub hard: Option<Metrics>,
}

/// Splits by task difficulty. `labels` overrides the difficulty recorded in
/// the reports (rule id -> label).
pub fn stratify(reports: &[EpisodeReport], labels: &BTreeMap<String, Difficulty>) -> Strata {
    let level = |t: &TaskOutcome| labels.get(&t.rule_id).copied().unwrap_or(t.difficulty);
    Strata {
        easy: metrics_where(reports, |t| level(t) == Difficulty::Easy),
        hard: metrics_where(reports, |t| level(t) == Difficulty::Hard),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub benchmark_id: String,
    pub agent: String,
    pub overall: Option<Metrics>,
    pub strata: Strata,
    pub episodes: Vec<EpisodeReport>,
}

impl BenchmarkReport {
    pub fn new(benchmark_id: &str, agent: &str, episodes: Vec<EpisodeReport>) -> Self {
        let labels = crate::metatask::list_rules(Default::default())
            .into_iter()
            .map(|r| (r.rule_id, r.difficulty))
            .collect();
        BenchmarkReport {
            benchmark_id: benchmark_id.to_string(),
            agent: agent.to_string(),
            overall: metrics(&episodes),
            strata: stratify(&episodes, &labels),
            episodes,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        canonical::encode_envelope(BENCHMARK_REPORT_FORMAT, REPORT_VERSION, self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        canonical::decode_envelope(bytes, BENCHMARK_REPORT_FORMAT, REPORT_VERSION)
    }

    /// Plain-text metrics table.
    pub fn render(&self) -> String {
        let row = |name: &str, m: &Option<Metrics>| match m {
            Some(m) => format!(
                "{name:<8} {:>5} {:>6} {:>6} {:>8} {:>10} {:>6}\n",
                m.scenarios,
                format!("{}/{}", m.successful_tasks, m.tasks),
                two_decimals(&m.success_rate),
                two_decimals(&m.checkpoint_score),
                two_decimals(&m.avg_steps),
                two_decimals(&m.avg_tool_calls),
            ),
            None => format!("{name:<8} (absent)\n"),
        };
        let mut out = format!("benchmark {}  agent {}\n", self.benchmark_id, self.agent);
        out.push_str(&format!(
            "{:<8} {:>5} {:>6} {:>6} {:>8} {:>10} {:>6}\n",
            "stratum", "scen", "tasks", "SR", "CS", "steps", "calls"
        ));
        out.push_str(&row("overall", &self.overall));
        out.push_str(&row("easy", &self.strata.easy));
        out.push_str(&row("hard", &self.strata.hard));
        let aborted = self.episodes.iter().filter(|e| e.aborted.is_some()).count();
        if aborted > 0 {
            out.push_str(&format!("aborted episodes: {aborted}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_case() {
        let s = score(&[
            Tally {
                completed: 2,
                total: 4,
            },
            Tally {
                completed: 3,
                total: 3,
            },
        ])
        .unwrap();
        assert_eq!(s, Fraction::new(3, 4));
        assert_eq!(two_decimals(&s), "0.75");
    }

    #[test]
    fn rounding() {
        assert_eq!(two_decimals(&Fraction::new(1, 3)), "0.33");
        assert_eq!(two_decimals(&Fraction::new(2, 3)), "0.67");
        assert_eq!(two_decimals(&Fraction::new(1, 200)), "0.01");
        assert_eq!(two_decimals(&Fraction::from_integer(1)), "1.00");
        assert_eq!(two_decimals(&Fraction::from_integer(0)), "0.00");
    }

    #[test]
    fn empty_inputs_are_errors() {
        assert_eq!(score(&[]), Err(ScoreError::NoTasks));
        assert!(matches!(
            score(&[Tally {
                completed: 0,
                total: 0
            }]),
            Err(ScoreError::EmptyTask(_))
        ));
    }
}
