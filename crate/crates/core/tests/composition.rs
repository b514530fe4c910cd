mod common;

use std::collections::BTreeSet;

use common::*;
use proptest::prelude::*;
use worksim_core::error::ComposeError;
use worksim_core::metatask::Reveal;
use worksim_core::scenario::{build_benchmark, compose, scenario_plan, Benchmark, Scenario};

#[test]
fn benchmark_is_reproducible() {
    let a = default_benchmark();
    let b = default_benchmark();
    assert_eq!(a.to_bytes(), b.to_bytes());
    assert_eq!(a.scenarios.len(), 50);
    assert!(a
        .scenarios
        .iter()
        .all(|s| (2..=6).contains(&s.hidden.tasks.len())));
    let ids: BTreeSet<_> = a.scenarios.iter().map(|s| s.scenario_id.clone()).collect();
    assert_eq!(ids.len(), 50);
}

#[test]
fn different_seeds_differ() {
    let rules = all_rules();
    let a = build_benchmark(&rules, 3, 2, 6, 1).unwrap();
    let b = build_benchmark(&rules, 3, 2, 6, 2).unwrap();
    assert_ne!(a.to_bytes(), b.to_bytes());
}

#[test]
fn benchmark_and_scenario_round_trip() {
    let b = build_benchmark(&all_rules(), 4, 2, 6, 5).unwrap();
    let back = Benchmark::from_bytes(&b.to_bytes()).unwrap();
    assert_eq!(back, b);
    let s = &b.scenarios[0];
    assert_eq!(&Scenario::from_bytes(&s.to_bytes()).unwrap(), s);
    assert!(b.scenario(&s.scenario_id).is_some());
    assert!(Scenario::from_bytes(&b.to_bytes()).is_err());
}

#[test]
fn invalid_requests_are_rejected() {
    let all = all_rules();
    assert_eq!(compose(&[], 1).unwrap_err(), ComposeError::RuleCount(0));
    let seven: Vec<_> = all.iter().take(7).cloned().collect();
    assert_eq!(compose(&seven, 1).unwrap_err(), ComposeError::RuleCount(7));
    assert_eq!(
        build_benchmark(&all, 0, 2, 6, 1).unwrap_err(),
        ComposeError::EmptyBenchmark
    );
    assert_eq!(
        build_benchmark(&[], 1, 2, 6, 1).unwrap_err(),
        ComposeError::EmptyRuleset
    );
    assert_eq!(
        build_benchmark(&all, 1, 4, 3, 1).unwrap_err(),
        ComposeError::TaskRange(4, 3)
    );
    assert_eq!(
        build_benchmark(&all, 1, 2, 7, 1).unwrap_err(),
        ComposeError::TaskRange(2, 7)
    );
}

#[test]
fn default_benchmark_has_preemption_and_reveals() {
    let b = default_benchmark();
    let during = b
        .scenarios
        .iter()
        .flat_map(|s| &s.hidden.tasks)
        .filter(|t| matches!(t.reveal, Reveal::DuringTask { .. }))
        .count();
    assert!(during > 0);
    assert!(b
        .scenarios
        .iter()
        .any(|s| s.meetings().count() > 0 && s.hidden.tasks.len() > 1));
}

#[test]
fn time_critical_windows_never_overlap() {
    for s in default_benchmark().scenarios {
        let windows: Vec<_> = s
            .hidden
            .tasks
            .iter()
            .filter_map(|t| t.oracle.window)
            .collect();
        for (i, a) in windows.iter().enumerate() {
            assert!(a.within(&s.workday));
            for b in &windows[i + 1..] {
                assert!(!a.overlaps(b), "{}: {a} vs {b}", s.scenario_id);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compose_is_deterministic_and_unique(seed in any::<u64>()) {
        let all = all_rules();
        let refs: Vec<_> = all.iter().collect();
        let ids = scenario_plan(&refs, seed, 0, 1, 6);
        let picked = rules(&ids.iter().map(String::as_str).collect::<Vec<_>>());
        let a = compose(&picked, seed).unwrap();
        let b = compose(&picked, seed).unwrap();
        prop_assert_eq!(a.to_bytes(), b.to_bytes());
        for (ns, names) in a.entity_names() {
            let unique: BTreeSet<_> = names.iter().collect();
            prop_assert_eq!(unique.len(), names.len(), "duplicate in {}", ns);
        }
        let checkpoints: Vec<_> = a.hidden.tasks.iter().flat_map(|t| &t.checkpoints).collect();
        prop_assert!(a.hidden.tasks.iter().all(|t| !t.checkpoints.is_empty()));
        let cp_ids: BTreeSet<_> = checkpoints.iter().map(|c| c.checkpoint_id.clone()).collect();
        prop_assert_eq!(cp_ids.len(), checkpoints.len());
    }
}
