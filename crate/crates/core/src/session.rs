//! One live episode: world state, trajectory, hints and an ordered event log.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::error::ScoreError;
use crate::scenario::{initial_observation, Scenario};
use crate::time::SimTime;
use crate::trajectory::{ActionRecord, Counters, Guidance, Step, Trajectory};
use crate::verifier::EpisodeReport;
use crate::world::{EventBody, Message, Observation, ToolCall, WorldState};

pub const MENTOR: &str = "Mentor";
pub const MAX_TIER: u8 = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("session is finalized")]
    Finalized,
    #[error("hint tier {got} is below the previous tier {last}")]
    TierRegression { last: u8, got: u8 },
    #[error("hint tier {0} is outside 0..=3")]
    TierRange(u8),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Open,
    Finalized,
}

/// An entry of the session's event stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    pub kind: String,
    pub at: SimTime,
    pub data: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hint {
    pub tier: u8,
    pub text: String,
    pub injected_at: SimTime,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub session_id: String,
    pub scenario: Arc<Scenario>,
    pub state: WorldState,
    pub trajectory: Trajectory,
    pub hints: Vec<Hint>,
    pub phase: Phase,
    pub agent: String,
    pub day: u32,
    pub events: Vec<SessionEvent>,
    report: Option<EpisodeReport>,
    calls_seen: u64,
    turns_seen: u64,
}

impl Session {
    pub fn new(session_id: &str, scenario: Arc<Scenario>) -> (Session, Observation) {
        let obs = initial_observation(&scenario);
        let state = scenario.initial_world();
        let s = Session {
            session_id: session_id.to_string(),
            state,
            scenario,
            trajectory: Trajectory::default(),
            hints: Vec::new(),
            phase: Phase::Open,
            agent: "external".to_string(),
            day: 1,
            events: Vec::new(),
            report: None,
            calls_seen: 0,
            turns_seen: 0,
        };
        (s, obs)
    }

    pub fn with_agent(mut self, agent: &str, day: u32) -> Self {
        self.agent = agent.to_string();
        self.day = day;
        self
    }

    pub fn initial_observation(&self) -> Observation {
        initial_observation(&self.scenario)
    }

    pub fn clock(&self) -> SimTime {
        self.state.clock
    }

    pub fn is_open(&self) -> bool {
        self.phase == Phase::Open
    }

    fn emit(&mut self, kind: &str, data: Value) {
        let seq = self.events.len() as u64;
        self.events.push(SessionEvent {
            seq,
            kind: kind.to_string(),
            at: self.state.clock,
            data,
        });
    }

    fn ensure_open(&self) -> Result<(), SessionError> {
        match self.phase {
            Phase::Open => Ok(()),
            Phase::Finalized => Err(SessionError::Finalized),
        }
    }

    /// One agent turn with any number of calls, executed in order.
    pub fn step(
        &mut self,
        thought: &str,
        calls: &[ToolCall],
    ) -> Result<Vec<Observation>, SessionError> {
        self.ensure_open()?;
        let clock = self.state.clock;
        let mut actions = Vec::with_capacity(calls.len());
        let mut observations = Vec::with_capacity(calls.len());
        for call in calls {
            let mut call = call.clone();
            self.calls_seen += 1;
            if call.id.is_none() {
                call.id = Some(format!("call_{}", self.calls_seen));
            }
            let obs = self.state.apply(&call);
            let result = obs.result.clone().expect("apply always yields a result");
            self.emit("tool_result", json!({"call": &call, "result": &result}));
            for n in &obs.notices {
                self.emit("env_event", json!(n));
            }
            actions.push(ActionRecord {
                call,
                result,
                notices: obs.notices.clone(),
            });
            observations.push(obs);
        }
        self.turns_seen += 1;
        let step = Step {
            index: 0,
            clock,
            thought: thought.to_string(),
            actions,
            unparseable: false,
        };
        self.trajectory.push(step);
        let last = self.trajectory.steps.last().expect("just pushed");
        let data =
            json!({"index": last.index, "thought": last.thought, "tool_calls": last.actions.len()});
        self.emit("step", data);
        Ok(observations)
    }

    pub fn act(&mut self, call: &ToolCall) -> Result<Observation, SessionError> {
        let mut obs = self.step("", std::slice::from_ref(call))?;
        Ok(obs.remove(0))
    }

    /// Records a model turn that produced no executable call.
    pub fn wasted_step(&mut self, text: &str) -> Result<(), SessionError> {
        self.ensure_open()?;
        self.turns_seen += 1;
        self.trajectory.push(Step {
            index: 0,
            clock: self.state.clock,
            thought: text.to_string(),
            actions: Vec::new(),
            unparseable: true,
        });
        let index = self.trajectory.steps.len() - 1;
        self.emit(
            "step",
            json!({"index": index, "thought": text, "tool_calls": 0, "unparseable": true}),
        );
        Ok(())
    }

    /// Queues a mentor message; the agent sees it with its next observation.
    pub fn inject_hint(&mut self, tier: u8, text: &str) -> Result<(), SessionError> {
        self.ensure_open()?;
        if tier > MAX_TIER {
            return Err(SessionError::TierRange(tier));
        }
        if let Some(last) = self.hints.last() {
            if tier < last.tier {
                return Err(SessionError::TierRegression {
                    last: last.tier,
                    got: tier,
                });
            }
        }
        let at = self.state.clock;
        self.state.push_event(
            at,
            EventBody::MessageArrival {
                message: Message {
                    from: MENTOR.to_string(),
                    to: self.state.agent.persona.email.clone(),
                    body: text.to_string(),
                    sent_at: at,
                },
            },
        );
        let hint = Hint {
            tier,
            text: text.to_string(),
            injected_at: at,
        };
        self.trajectory.push_hint(Guidance {
            tier,
            text: text.to_string(),
            injected_at: at,
            after_step: self.trajectory.steps.len(),
        });
        self.emit("hint", json!(&hint));
        self.hints.push(hint);
        Ok(())
    }

    /// Independent count of turns and calls, kept apart from the trajectory.
    pub fn observed_counters(&self) -> Counters {
        Counters {
            steps: self.turns_seen,
            tool_calls: self.calls_seen,
        }
    }

    pub fn finalize(&mut self) -> Result<EpisodeReport, SessionError> {
        self.finalize_with(None)
    }

    /// Scores the episode once; later calls return the stored report.
    pub fn finalize_with(
        &mut self,
        aborted: Option<String>,
    ) -> Result<EpisodeReport, SessionError> {
        if let Some(r) = &self.report {
            return Ok(r.clone());
        }
        let mut aborted = aborted;
        let recount = self.trajectory.recount();
        if recount != self.trajectory.counters || recount != self.observed_counters() {
            aborted.get_or_insert_with(|| "counter mismatch".to_string());
        }
        let report = EpisodeReport::build(
            &self.scenario,
            &self.state,
            &self.trajectory,
            &self.agent,
            self.day,
            aborted,
        )?;
        for c in &report.checkpoints {
            self.emit("checkpoint", json!(c));
        }
        self.emit("finalized", json!(&report));
        self.phase = Phase::Finalized;
        self.report = Some(report.clone());
        Ok(report)
    }

    pub fn report(&self) -> Option<&EpisodeReport> {
        self.report.as_ref()
    }
}
