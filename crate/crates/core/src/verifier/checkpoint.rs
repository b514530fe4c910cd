//! Checkpoint predicates and submission matchers.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::submission::{canon, fields, list, number, pairs};
use crate::metatask::eventplan::{event_plan_opt, EventProblem};
use crate::metatask::knapsack::{knapsack_opt, Channel};
use crate::time::SimTime;
use crate::world::{ClueId, MeetingId, NpcId, TaskId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub checkpoint_id: String,
    pub task_id: TaskId,
    pub predicate: Predicate,
    pub description: String,
    pub feedback: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Predicate {
    /// The agent asked `npc` something containing every keyword.
    NpcAsked {
        npc: NpcId,
        keywords: BTreeSet<String>,
    },
    ClueRevealed {
        clue: ClueId,
    },
    FileRead {
        path: String,
    },
    /// The agent messaged `to` with text containing every keyword.
    MessageSent {
        to: NpcId,
        keywords: BTreeSet<String>,
    },
    MeetingAttended {
        meeting_id: MeetingId,
        min_minutes: i64,
    },
    SubmissionMatches {
        matcher: Matcher,
    },
    SubmissionOptimal {
        oracle: Oracle,
        tolerance: Tolerance,
    },
    /// Latest submission is on time and well-formed.
    DeadlineMet {
        deadline: SimTime,
        form: SubmissionForm,
    },
}

impl Predicate {
    pub fn kind(&self) -> &'static str {
        match self {
            Predicate::NpcAsked { .. } => "npc_asked",
            Predicate::ClueRevealed { .. } => "clue_revealed",
            Predicate::FileRead { .. } => "file_read",
            Predicate::MessageSent { .. } => "message_sent",
            Predicate::MeetingAttended { .. } => "meeting_attended",
            Predicate::SubmissionMatches { .. } => "submission_matches",
            Predicate::SubmissionOptimal { .. } => "submission_optimal",
            Predicate::DeadlineMet { .. } => "deadline_met",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Tolerance {
    Exact,
    Relative(f64),
}

impl Tolerance {
    /// `achieved` is at least `target` up to the tolerance.
    pub fn reaches(&self, achieved: f64, target: f64) -> bool {
        match self {
            Tolerance::Exact => achieved >= target,
            Tolerance::Relative(r) => achieved >= target - r * target.abs().max(1.0),
        }
    }

    pub fn equal(&self, a: f64, b: f64) -> bool {
        match self {
            Tolerance::Exact => a == b,
            Tolerance::Relative(r) => (a - b).abs() <= r * b.abs().max(1.0),
        }
    }
}

/// Real-valued answers are compared with this relative tolerance.
pub const REAL_TOLERANCE: Tolerance = Tolerance::Relative(1e-6);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Matcher {
    /// `flagged:` lists exactly these ids.
    FlaggedIds {
        expected: BTreeSet<String>,
    },
    /// `<key>=<int>` pairs equal to `expected`.
    KeyValues {
        expected: BTreeMap<String, i64>,
    },
    /// Named fields equal the expected text (whitespace and case ignored).
    Fields {
        expected: BTreeMap<String, String>,
    },
    /// Every channel's reported exposure equals its true exposure.
    AdsExposures {
        channels: Vec<Channel>,
    },
    /// The selection is optimal for the exposures the agent reported.
    AdsSelfOptimal {
        channels: Vec<Channel>,
        budget: i64,
    },
    EventDate {
        problem: EventProblem,
    },
    EventFeasible {
        problem: EventProblem,
    },
    /// The reported score is the true score of the submitted itinerary.
    EventScore {
        problem: EventProblem,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Oracle {
    Knapsack { channels: Vec<Channel>, budget: i64 },
    EventPlan { problem: EventProblem },
}

/// Shape a submission must have to count as handed in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SubmissionForm {
    Any,
    Flagged,
    KeyValues,
    Fields { names: Vec<String> },
    AdsPlan { channels: Vec<String> },
    EventPlan { venues: Vec<String> },
}

/// Parsed ads plan: selected channel indices and reported exposures.
struct AdsPlan {
    selected: Vec<usize>,
    reported: Vec<f64>,
}

fn channel_index(names: &[&str], name: &str) -> Option<usize> {
    let want = canon(name);
    names.iter().position(|n| canon(n) == want)
}

fn parse_ads(content: &str, names: &[&str]) -> Option<AdsPlan> {
    let f = fields(content);
    let mut selected = Vec::new();
    for name in list(f.get("channels")?) {
        let i = channel_index(names, &name)?;
        if selected.contains(&i) {
            return None;
        }
        selected.push(i);
    }
    if selected.is_empty() {
        return None;
    }
    selected.sort_unstable();
    let mut reported = vec![None; names.len()];
    for (k, v) in pairs(f.get("exposures")?) {
        let i = channel_index(names, &k)?;
        reported[i] = Some(number(&v)?);
    }
    let reported = reported.into_iter().collect::<Option<Vec<f64>>>()?;
    number(f.get("total_cost")?)?;
    number(f.get("total_exposure")?)?;
    Some(AdsPlan { selected, reported })
}

struct EventSubmission {
    date: NaiveDate,
    itinerary: Vec<String>,
    score: Option<f64>,
}

fn parse_event(content: &str, problem_venues: &[&str]) -> Option<EventSubmission> {
    let f = fields(content);
    let date = NaiveDate::parse_from_str(f.get("date")?.trim(), "%Y-%m-%d").ok()?;
    let itinerary = list(f.get("itinerary")?);
    if itinerary.is_empty()
        || itinerary
            .iter()
            .any(|v| channel_index(problem_venues, v).is_none())
    {
        return None;
    }
    Some(EventSubmission {
        date,
        itinerary,
        score: f.get("score").and_then(|s| number(s)),
    })
}

impl SubmissionForm {
    pub fn accepts(&self, content: &str) -> bool {
        match self {
            SubmissionForm::Any => !content.trim().is_empty(),
            SubmissionForm::Flagged => fields(content)
                .get("flagged")
                .is_some_and(|v| !list(v).is_empty()),
            SubmissionForm::KeyValues => content
                .lines()
                .flat_map(|l| pairs(l).into_values())
                .any(|v| number(&v).is_some()),
            SubmissionForm::Fields { names } => {
                let f = fields(content);
                names
                    .iter()
                    .all(|n| f.get(n).is_some_and(|v| !v.is_empty()))
            }
            SubmissionForm::AdsPlan { channels } => {
                let names: Vec<&str> = channels.iter().map(String::as_str).collect();
                parse_ads(content, &names).is_some()
            }
            SubmissionForm::EventPlan { venues } => {
                let names: Vec<&str> = venues.iter().map(String::as_str).collect();
                parse_event(content, &names).is_some_and(|e| e.score.is_some())
            }
        }
    }
}

fn names_of(channels: &[Channel]) -> Vec<&str> {
    channels.iter().map(|c| c.name.as_str()).collect()
}

fn venue_names(problem: &EventProblem) -> Vec<&str> {
    problem.venues.iter().map(|v| v.name.as_str()).collect()
}

impl Matcher {
    pub fn matches(&self, content: &str) -> bool {
        match self {
            Matcher::FlaggedIds { expected } => {
                let Some(v) = fields(content).get("flagged").cloned() else {
                    return false;
                };
                let got: BTreeSet<String> = list(&v).iter().map(|x| canon(x)).collect();
                let want: BTreeSet<String> = expected.iter().map(|x| canon(x)).collect();
                got == want
            }
            Matcher::KeyValues { expected } => {
                let mut got = BTreeMap::new();
                for line in content.lines() {
                    for (k, v) in pairs(line) {
                        let Some(x) = number(&v) else { return false };
                        got.insert(canon(&k), x);
                    }
                }
                got.len() == expected.len()
                    && expected
                        .iter()
                        .all(|(k, v)| got.get(&canon(k)).is_some_and(|x| *x == *v as f64))
            }
            Matcher::Fields { expected } => {
                let f = fields(content);
                expected.iter().all(|(k, v)| {
                    f.get(&k.to_lowercase())
                        .is_some_and(|x| canon(x) == canon(v))
                })
            }
            Matcher::AdsExposures { channels } => match parse_ads(content, &names_of(channels)) {
                Some(plan) => channels
                    .iter()
                    .zip(&plan.reported)
                    .all(|(c, r)| REAL_TOLERANCE.equal(*r, c.exposure)),
                None => false,
            },
            Matcher::AdsSelfOptimal { channels, budget } => {
                match parse_ads(content, &names_of(channels)) {
                    Some(plan) => {
                        let cost: i64 = plan.selected.iter().map(|&i| channels[i].cost).sum();
                        let items: Vec<(i64, f64)> = channels
                            .iter()
                            .zip(&plan.reported)
                            .map(|(c, r)| (c.cost, *r))
                            .collect();
                        let best = knapsack_opt(*budget, &items).total_exposure;
                        let got: f64 = plan.selected.iter().map(|&i| plan.reported[i]).sum();
                        cost <= *budget && REAL_TOLERANCE.reaches(got, best)
                    }
                    None => false,
                }
            }
            Matcher::EventDate { problem } => match parse_event(content, &venue_names(problem)) {
                Some(e) => problem.common_dates().contains(&e.date),
                None => false,
            },
            Matcher::EventFeasible { problem } => match parse_event(content, &venue_names(problem))
            {
                Some(e) => problem.itinerary_feasible(e.date, &e.itinerary),
                None => false,
            },
            Matcher::EventScore { problem } => match parse_event(content, &venue_names(problem)) {
                Some(EventSubmission {
                    itinerary,
                    score: Some(reported),
                    ..
                }) => problem
                    .score(&itinerary)
                    .is_some_and(|s| reported == s as f64),
                _ => false,
            },
        }
    }
}

impl Oracle {
    /// The submission reaches the oracle's optimum within `tolerance`.
    pub fn satisfied_by(&self, content: &str, tolerance: Tolerance) -> bool {
        match self {
            Oracle::Knapsack { channels, budget } => {
                match parse_ads(content, &names_of(channels)) {
                    Some(plan) => {
                        let cost: i64 = plan.selected.iter().map(|&i| channels[i].cost).sum();
                        let got: f64 = plan.selected.iter().map(|&i| channels[i].exposure).sum();
                        let items: Vec<(i64, f64)> =
                            channels.iter().map(|c| (c.cost, c.exposure)).collect();
                        cost <= *budget
                            && tolerance.reaches(got, knapsack_opt(*budget, &items).total_exposure)
                    }
                    None => false,
                }
            }
            Oracle::EventPlan { problem } => {
                let Some(e) = parse_event(content, &venue_names(problem)) else {
                    return false;
                };
                let Ok(best) = event_plan_opt(problem) else {
                    return false;
                };
                problem.common_dates().contains(&e.date)
                    && problem.itinerary_feasible(e.date, &e.itinerary)
                    && problem
                        .score(&e.itinerary)
                        .is_some_and(|s| tolerance.reaches(s as f64, best.score as f64))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn channels() -> Vec<Channel> {
        vec![
            Channel {
                name: "Radio".into(),
                cost: 6,
                exposure: 30.0,
            },
            Channel {
                name: "Bus Wraps".into(),
                cost: 5,
                exposure: 25.0,
            },
            Channel {
                name: "Posters".into(),
                cost: 4,
                exposure: 20.0,
            },
        ]
    }

    const OPTIMAL: &str = "channels: Radio, Posters\nexposures: Radio=30; Bus Wraps=25; Posters=20\ntotal_cost: 10\ntotal_exposure: 50";

    #[test]
    fn knapsack_oracle_accepts_optimal_plan() {
        let o = Oracle::Knapsack {
            channels: channels(),
            budget: 10,
        };
        assert!(o.satisfied_by(OPTIMAL, REAL_TOLERANCE));
        let worse = OPTIMAL.replace("channels: Radio, Posters", "channels: Bus Wraps, Posters");
        assert!(!o.satisfied_by(&worse, REAL_TOLERANCE));
        let over = OPTIMAL.replace("channels: Radio, Posters", "channels: Radio, Bus Wraps");
        assert!(!o.satisfied_by(&over, REAL_TOLERANCE));
    }

    #[test]
    fn ads_matchers() {
        let exact = Matcher::AdsExposures {
            channels: channels(),
        };
        assert!(exact.matches(OPTIMAL));
        assert!(!exact.matches(&OPTIMAL.replace("Posters=20", "Posters=21")));
        let own = Matcher::AdsSelfOptimal {
            channels: channels(),
            budget: 10,
        };
        let inflated = OPTIMAL
            .replace("channels: Radio, Posters", "channels: Bus Wraps, Posters")
            .replace("Bus Wraps=25", "Bus Wraps=35");
        assert!(own.matches(&inflated));
        assert!(!exact.matches(&inflated));
        assert!(SubmissionForm::AdsPlan {
            channels: channels().into_iter().map(|c| c.name).collect()
        }
        .accepts(OPTIMAL));
        assert!(!SubmissionForm::AdsPlan {
            channels: vec!["Radio".into()]
        }
        .accepts("channels: TV"));
    }

    #[test]
    fn key_values_and_flags() {
        let m = Matcher::KeyValues {
            expected: [("2024-02".to_string(), 1200)].into(),
        };
        assert!(m.matches("2024-02=1200"));
        assert!(m.matches("2024-02 = 1,200"));
        assert!(!m.matches("2024-02=1200\n2024-03=5"));
        let f = Matcher::FlaggedIds {
            expected: ["TX-1".to_string(), "TX-7".to_string()].into(),
        };
        assert!(f.matches("flagged: tx-7, TX-1"));
        assert!(!f.matches("flagged: TX-1"));
    }

    #[test]
    fn tolerance_semantics() {
        assert!(Tolerance::Exact.reaches(5.0, 5.0));
        assert!(!Tolerance::Exact.reaches(4.999, 5.0));
        assert!(REAL_TOLERANCE.reaches(99.99999999, 100.0));
    }
}
