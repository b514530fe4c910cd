mod common;

use std::collections::BTreeMap;

use common::*;
use num_rational::Ratio;
use proptest::prelude::*;
use worksim_core::error::ScoreError;
use worksim_core::metatask::knapsack::greedy_by_ratio;
use worksim_core::metatask::rules::strategy::draw_ads;
use worksim_core::metatask::{event_plan_opt, knapsack_opt, Difficulty};
use worksim_core::rng::{Stream, Tag};
use worksim_core::trajectory::Counters;
use worksim_core::verifier::{
    feedback, metrics, score, stratify, EpisodeReport, Tally, TaskOutcome,
};

fn tallies(tasks: &[(u64, u64)]) -> Vec<Tally> {
    tasks
        .iter()
        .map(|&(c, t)| Tally {
            completed: c as usize,
            total: t as usize,
        })
        .collect()
}

fn assignment() -> impl Strategy<Value = Vec<(u64, u64)>> {
    prop::collection::vec((1u64..=9).prop_flat_map(|t| (0..=t, Just(t))), 1..=6)
}

#[test]
fn hand_case() {
    assert_eq!(
        score(&tallies(&[(2, 4), (3, 3)])).unwrap(),
        Ratio::new(3, 4)
    );
    assert_eq!(score(&[]).unwrap_err(), ScoreError::NoTasks);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn score_matches_brute_force(tasks in assignment()) {
        let got = score(&tallies(&tasks)).unwrap();
        let (num, den) = brute_score(&tasks);
        prop_assert_eq!((*got.numer() as i128, *got.denom() as i128), (num, den));
        prop_assert!(got >= Ratio::from_integer(0) && got <= Ratio::from_integer(1));
    }

    #[test]
    fn completing_more_never_lowers_the_score(tasks in assignment(), pick in any::<prop::sample::Index>()) {
        let i = pick.index(tasks.len());
        let mut better = tasks.clone();
        if better[i].0 < better[i].1 {
            better[i].0 += 1;
        }
        prop_assert!(score(&tallies(&better)).unwrap() >= score(&tallies(&tasks)).unwrap());
    }
}

#[test]
fn knapsack_matches_exhaustive_search() {
    for seed in 0..200u64 {
        let (budget, items) = knapsack_instance(seed);
        let sel = knapsack_opt(budget, &items);
        assert_eq!(
            sel.total_exposure,
            exhaustive_knapsack(budget, &items),
            "instance {seed}"
        );
        assert!(sel.total_cost <= budget);
        let recomputed: f64 = sel.subset.iter().map(|&i| items[i].1).sum();
        assert_eq!(recomputed, sel.total_exposure);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn knapsack_dominates_greedy(seed in any::<u64>()) {
        let d = draw_ads(&mut Stream::derive(seed, &[Tag::from("ads")])).unwrap();
        let channels = d.true_channels();
        let items: Vec<(i64, f64)> = channels.iter().map(|c| (c.cost, c.exposure)).collect();
        let opt = knapsack_opt(d.budget, &items).total_exposure;
        prop_assert!(opt + 1e-9 >= greedy_by_ratio(d.budget, &channels).total_exposure);
        prop_assert!((opt - exhaustive_knapsack(d.budget, &items)).abs() < 1e-9);
    }
}

#[test]
fn event_plan_matches_enumeration() {
    let mut solved = 0;
    for seed in 0..50u64 {
        let p = event_fixture(seed);
        let want = exhaustive_event(&p);
        match event_plan_opt(&p) {
            Ok(plan) => {
                assert_eq!(Some(plan.score), want, "fixture {seed}");
                assert!(p.itinerary_feasible(plan.date, &plan.itinerary));
                assert_eq!(p.score(&plan.itinerary), Some(plan.score));
                solved += 1;
            }
            Err(_) => assert_eq!(want, None, "fixture {seed}"),
        }
    }
    assert!(solved >= 25);
}

fn outcome(
    id: &str,
    rule: &str,
    difficulty: Difficulty,
    completed: usize,
    total: usize,
) -> TaskOutcome {
    TaskOutcome {
        task_id: id.into(),
        rule_id: rule.into(),
        difficulty,
        completed,
        total,
    }
}

fn report(id: &str, tasks: Vec<TaskOutcome>, steps: u64) -> EpisodeReport {
    let t: Vec<Tally> = tasks
        .iter()
        .map(|t| Tally {
            completed: t.completed,
            total: t.total,
        })
        .collect();
    let s = score(&t).unwrap();
    EpisodeReport {
        scenario_id: id.into(),
        agent: "hand".into(),
        day: 1,
        checkpoints: Vec::new(),
        tasks,
        score_display: worksim_core::verifier::two_decimals(&s),
        score: s,
        counters: Counters {
            steps,
            tool_calls: steps,
        },
        feedback: feedback(id, 1, &[]),
        aborted: None,
    }
}

#[test]
fn strata_match_hand_computation() {
    use Difficulty::{Easy, Hard};
    let reports = vec![
        report(
            "a",
            vec![
                outcome("T1", "x", Easy, 2, 2),
                outcome("T2", "y", Hard, 1, 4),
            ],
            10,
        ),
        report(
            "b",
            vec![
                outcome("T1", "x", Easy, 0, 3),
                outcome("T2", "y", Hard, 3, 3),
            ],
            20,
        ),
    ];
    let all = metrics(&reports).unwrap();
    // a: (1 + 1/4) / 2 = 5/8, b: (0 + 1) / 2 = 1/2
    assert_eq!(all.checkpoint_score, Ratio::new(9, 16));
    assert_eq!(all.success_rate, Ratio::new(2, 4));
    assert_eq!(all.avg_steps, Ratio::from_integer(15));
    let s = stratify(&reports, &BTreeMap::new());
    let easy = s.easy.unwrap();
    let hard = s.hard.unwrap();
    assert_eq!(easy.checkpoint_score, Ratio::new(1, 2));
    assert_eq!(easy.success_rate, Ratio::new(1, 2));
    assert_eq!(hard.checkpoint_score, Ratio::new(5, 8));
    assert_eq!(hard.success_rate, Ratio::new(1, 2));
    let weighted = (easy.success_rate * easy.tasks as i64 + hard.success_rate * hard.tasks as i64)
        / all.tasks as i64;
    assert_eq!(weighted, all.success_rate);

    let easy_only = vec![report("c", vec![outcome("T1", "x", Easy, 1, 1)], 3)];
    assert!(stratify(&easy_only, &BTreeMap::new()).hard.is_none());
}
