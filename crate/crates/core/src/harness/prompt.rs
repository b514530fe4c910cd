//! System prompt and observation rendering.

use serde::{Deserialize, Serialize};

use crate::verifier::FeedbackBundle;
use crate::world::{Observation, Persona, TaskBrief};

pub const LESSONS_HEADING: &str = "Lessons from previous days";

/// An insight carried from one day's feedback into the next day's prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperienceRecord {
    pub rule_id: String,
    pub day: u32,
    pub insight: String,
    pub source: FeedbackRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackRef {
    pub scenario_id: String,
    pub day: u32,
    pub checkpoint_id: String,
}

impl FeedbackRef {
    /// Checkpoint key without the task prefix (`T2.ask_hr` -> `ask_hr`).
    pub fn checkpoint_key(&self) -> &str {
        self.checkpoint_id
            .split_once('.')
            .map(|(_, k)| k)
            .unwrap_or(&self.checkpoint_id)
    }
}

pub fn render_task(t: &TaskBrief) -> String {
    let mut line = format!("- [{}] {}", t.task_id, t.description);
    if let Some(d) = t.deadline {
        line.push_str(&format!(" (deadline {})", d.hhmm()));
    }
    if t.priority == crate::world::Priority::TimeCritical {
        line.push_str(" [time-critical]");
    }
    line
}

pub const CALL_FORMAT: &str = "To use tools, answer with one or more blocks of the form\n\
<tool_call>\n{\"name\": \"ToolName\", \"arguments\": {\"param\": \"value\"}}\n</tool_call>\n\
Write <stop/> when you have finished all tasks.";

/// Deterministic system prompt built from the agent-facing observation only.
pub fn build_system_prompt(
    observation: &Observation,
    persona: &Persona,
    experiences: &[ExperienceRecord],
) -> String {
    let mut out = format!(
        "You are {}, a new intern at {} ({}). You work through your colleagues, files, databases and tools; \
         nobody hands you all the information up front.\n",
        persona.name, persona.company, persona.email
    );
    if let Some(w) = observation.workday {
        out.push_str(&format!(
            "Today is {}. The workday runs {}. The time is now {}.\n",
            w.start.date(),
            w,
            observation.clock.hhmm()
        ));
    }
    out.push_str("\n## Tasks\n");
    for t in &observation.tasks {
        out.push_str(&render_task(t));
        out.push('\n');
    }
    if !observation.contacts.is_empty() {
        out.push_str("\n## Contacts\n");
        for c in &observation.contacts {
            out.push_str(&format!(
                "- {} | {} | {} | {}\n",
                c.name, c.role, c.department, c.email
            ));
        }
    }
    if !observation.databases.is_empty() {
        out.push_str(&format!(
            "\n## Databases\n{}\n",
            observation.databases.join(", ")
        ));
    }
    out.push_str("\n## Tools\n");
    for t in &observation.tools {
        let params: Vec<String> = t
            .parameters
            .iter()
            .map(|p| format!("{}{}", p.name, if p.required { "" } else { "?" }))
            .collect();
        out.push_str(&format!(
            "- {}({}): {}\n",
            t.name,
            params.join(", "),
            t.description
        ));
    }
    out.push('\n');
    out.push_str(CALL_FORMAT);
    out.push('\n');
    if !experiences.is_empty() {
        out.push_str(&format!("\n## {LESSONS_HEADING}\n"));
        for e in experiences {
            out.push_str(&format!("- {}\n", e.insight));
        }
    }
    out
}

/// Text the agent reads after a call.
pub fn render_observation(obs: &Observation) -> String {
    let mut out = format!("[{}]", obs.clock.hhmm());
    if let Some(r) = &obs.result {
        out.push_str(&format!(" {}: {}", r.tool_name, r.payload));
    }
    for n in &obs.notices {
        out.push_str(&format!("\n[{}] {}", n.at.hhmm(), n.text));
    }
    for t in &obs.tasks {
        out.push('\n');
        out.push_str(&render_task(t));
    }
    out
}

/// Verbatim reflector: one experience per feedback line.
pub fn reflect(
    bundle: &FeedbackBundle,
    rule_of: impl Fn(&str) -> Option<String>,
) -> Vec<ExperienceRecord> {
    bundle
        .missed
        .iter()
        .map(|m| {
            let task = m.checkpoint_id.split('.').next().unwrap_or_default();
            ExperienceRecord {
                rule_id: rule_of(task).unwrap_or_default(),
                day: bundle.day,
                insight: m.feedback.clone(),
                source: FeedbackRef {
                    scenario_id: bundle.scenario_id.clone(),
                    day: bundle.day,
                    checkpoint_id: m.checkpoint_id.clone(),
                },
            }
        })
        .collect()
}
