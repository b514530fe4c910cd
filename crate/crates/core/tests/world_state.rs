mod common;

use std::path::PathBuf;

use common::*;
use proptest::prelude::*;
use worksim_core::harness::agents::{Agent, EpisodeStart, RandomAgent, Reply};
use worksim_core::harness::prompt::build_system_prompt;
use worksim_core::scenario::{compose, initial_observation, scenario_plan, Scenario};
use worksim_core::world::{
    advance_clock, deserialize_state, serialize_state, transition, ToolCall,
};

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/world_seed0.json")
}

fn seed0() -> Scenario {
    let all = all_rules();
    let refs: Vec<_> = all.iter().collect();
    let picked = rules(
        &scenario_plan(&refs, 0, 0, 2, 6)
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>(),
    );
    compose(&picked, 0).unwrap()
}

#[test]
fn golden_state_bytes_are_frozen() {
    let bytes = serialize_state(&seed0().initial_world());
    let path = golden_path();
    if std::env::var_os("WORKSIM_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &bytes).unwrap();
    }
    let stored = std::fs::read(&path).expect("golden file; run with WORKSIM_BLESS=1 to create it");
    assert!(
        stored == bytes,
        "initial state of seed 0 drifted from the golden file"
    );
}

#[test]
fn state_round_trip_is_canonical() {
    let w = seed0().initial_world();
    let b = serialize_state(&w);
    let back = deserialize_state(&b).unwrap();
    assert_eq!(back, w);
    assert_eq!(serialize_state(&back), b);
}

#[test]
fn clock_alone_changes_bytes() {
    let w = seed0().initial_world();
    let later = advance_clock(&w, w.clock.plus_minutes(1)).unwrap();
    assert_ne!(serialize_state(&w), serialize_state(&later));
}

#[test]
fn malformed_state_names_the_field() {
    let w = seed0().initial_world();
    let mut v: serde_json::Value = serde_json::from_slice(&serialize_state(&w)).unwrap();
    v["body"]["clock"] = serde_json::json!(17);
    let err = deserialize_state(&serde_json::to_vec(&v).unwrap()).unwrap_err();
    assert_eq!(err.path, "body.clock");
    let err = deserialize_state(b"{\"format\":\"other\",\"version\":1,\"body\":null}").unwrap_err();
    assert!(
        err.path == "format" || err.path.starts_with("body"),
        "{err}"
    );
}

#[test]
fn advancing_by_zero_is_identity() {
    let w = seed0().initial_world();
    assert_eq!(advance_clock(&w, w.clock).unwrap(), w);
}

#[test]
fn moving_backwards_is_rejected() {
    let w = seed0().initial_world();
    let later = advance_clock(&w, w.clock.plus_minutes(30)).unwrap();
    let mut copy = later.clone();
    assert!(copy.advance_clock(w.clock).is_err());
    assert_eq!(copy, later);
}

#[test]
fn two_meetings_fire_in_chronological_order() {
    let s = compose(&rules(&["meeting_attendance", "meeting_attendance"]), 9).unwrap();
    let w = s.initial_world();
    let end = advance_clock(&w, s.workday.end).unwrap();
    let mut expected: Vec<(String, String)> = Vec::new();
    let mut meetings: Vec<_> = s.meetings().collect();
    meetings.sort_by_key(|m| m.interval.start);
    assert_eq!(meetings.len(), 2);
    assert!(!meetings[0].interval.overlaps(&meetings[1].interval));
    for m in &meetings {
        expected.push(("meeting_start".into(), m.meeting_id.clone()));
        expected.push(("meeting_end".into(), m.meeting_id.clone()));
    }
    let fired: Vec<(String, String)> = end
        .event_log
        .iter()
        .filter_map(|e| match &e.body {
            worksim_core::world::EventBody::MeetingStart { meeting_id } => {
                Some(("meeting_start".into(), meeting_id.clone()))
            }
            worksim_core::world::EventBody::MeetingEnd { meeting_id } => {
                Some(("meeting_end".into(), meeting_id.clone()))
            }
            _ => None,
        })
        .collect();
    assert_eq!(fired, expected);
    assert!(end
        .event_log
        .windows(2)
        .all(|p| p[0].trigger_time <= p[1].trigger_time));
}

#[test]
fn passing_a_deadline_is_logged() {
    let s = compose(&rules(&["data_completion"]), 2).unwrap();
    let w = advance_clock(&s.initial_world(), s.workday.end).unwrap();
    assert!(w
        .event_log
        .iter()
        .any(|e| e.body.kind() == "deadline_passed"));
}

#[test]
fn meeting_reveal_tasks_are_withheld() {
    let found = (0..200u64).find_map(|seed| {
        let s = compose(&rules(&["meeting_attendance", "report_drafting"]), seed).ok()?;
        let hidden = s.hidden.meeting_reveals.values().flatten().next()?.clone();
        Some((s, hidden))
    });
    let (s, hidden) = found.expect("a during-meeting reveal within 200 seeds");
    let obs = initial_observation(&s);
    assert!(obs.tasks.iter().all(|t| t.task_id != hidden));
    let description = &s.task(&hidden).unwrap().description;
    let prompt = build_system_prompt(&obs, &s.persona, &[]);
    assert!(!prompt.contains(description.as_str()));
}

#[test]
fn observation_without_clues_lists_all_tasks() {
    let s = compose(&rules(&["meeting_attendance"]), 1).unwrap();
    assert_eq!(s.clues().count(), 0);
    let obs = initial_observation(&s);
    assert_eq!(obs.tasks.len(), 1);
    assert_eq!(obs.tools, worksim_core::tools::catalog());
}

/// Random calls against a small scenario, as (scenario, calls).
fn random_walk(seed: u64, steps: usize) -> (Scenario, Vec<ToolCall>) {
    let s = compose(
        &rules(&["website_monitoring", "meeting_attendance"]),
        seed % 17,
    )
    .unwrap();
    let obs = initial_observation(&s);
    let prompt = build_system_prompt(&obs, &s.persona, &[]);
    let mut agent = RandomAgent::new(seed);
    agent.begin(&EpisodeStart {
        scenario: &s,
        observation: &obs,
        system_prompt: &prompt,
        experiences: &[],
    });
    let mut calls = Vec::new();
    while calls.len() < steps {
        if let Ok(Reply::Act { calls: c, .. }) = agent.next(&[]) {
            calls.extend(c);
        }
    }
    (s, calls)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transitions_keep_state_invariants(seed in any::<u64>()) {
        let (s, calls) = random_walk(seed, 40);
        let mut w = s.initial_world();
        for call in &calls {
            let before = w.clone();
            let (next, obs) = transition(&w, call);
            prop_assert_eq!(&w, &before);
            prop_assert!(next.clock >= w.clock);
            prop_assert!(w.revealed_clues.is_subset(&next.revealed_clues));
            prop_assert!(next.pending_events.iter().all(|e| e.trigger_time > next.clock));
            prop_assert_eq!(obs.clock, next.clock);
            w = next;
        }
    }

    #[test]
    fn same_actions_same_bytes(seed in any::<u64>()) {
        let (s, calls) = random_walk(seed, 25);
        let run = || {
            let mut w = s.initial_world();
            for c in &calls {
                w.apply(c);
            }
            serialize_state(&w)
        };
        prop_assert_eq!(run(), run());
    }
}
