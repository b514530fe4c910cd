use thiserror::Error;

/// A snapshot or document failed to decode.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("decode error at `{path}`: {message}")]
pub struct DecodeError {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GenerationError {
    #[error("name pool `{pool}` has no free entry for slot `{slot}`")]
    PoolExhausted { pool: String, slot: String },
    #[error("unknown name pool `{0}`")]
    UnknownPool(String),
    #[error("unknown rule `{0}`")]
    UnknownRule(String),
    #[error("rule `{0}` found no admissible data draw")]
    RejectionLimit(String),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum InstantiateError {
    #[error("template slot `{slot}` is unresolved in `{template}`")]
    UnresolvedSlot { slot: String, template: String },
    #[error("draw for rule `{draw}` used to instantiate rule `{rule}`")]
    RuleMismatch { rule: String, draw: String },
    #[error("draw is missing value `{0}`")]
    MissingValue(String),
    #[error("manifest for `{rule}` has no template `{key}`")]
    MissingTemplate { rule: String, key: String },
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ComposeError {
    #[error("a scenario needs between 1 and 6 rules, got {0}")]
    RuleCount(usize),
    #[error("could not resolve a unique name for slot `{slot}` after {attempts} attempts")]
    NameExhaustion { slot: String, attempts: u32 },
    #[error("npc `{npc}` has overlapping reply triggers on keywords {keywords:?}")]
    OverlappingTriggers { npc: String, keywords: Vec<String> },
    #[error("clue `{clue}` is assigned to unknown npc `{npc}`")]
    UnknownCustodian { clue: String, npc: String },
    #[error("workday cannot fit the time-critical intervals ({0})")]
    WorkdayTooShort(String),
    #[error("entity `{0}` is defined twice with different contents")]
    EntityConflict(String),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Instantiate(#[from] InstantiateError),
    #[error("benchmark size must be positive")]
    EmptyBenchmark,
    #[error("invalid task-count range {0}..={1}")]
    TaskRange(usize, usize),
    #[error("ruleset is empty")]
    EmptyRuleset,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ScoreError {
    #[error("scenario has no tasks")]
    NoTasks,
    #[error("task `{0}` has no checkpoints")]
    EmptyTask(String),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PlanError {
    #[error("no feasible plan: {0}")]
    NoFeasiblePlan(String),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ClockError {
    #[error("cannot move the clock back from {now} to {requested}")]
    Backwards { now: String, requested: String },
}
