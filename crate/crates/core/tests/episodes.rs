mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use common::*;
use num_rational::Ratio;
use worksim_core::harness::agents::{Agent, EpisodeStart, Reply};
use worksim_core::harness::backend::BackendError;
use worksim_core::harness::history::{maintain_history, total_tokens, HistoryEntry, ResultLine};
use worksim_core::harness::prompt::LESSONS_HEADING;
use worksim_core::harness::*;
use worksim_core::session::{Session, SessionError, MENTOR};
use worksim_core::world::{Observation, ToolCall};

#[test]
fn oracle_is_perfect_and_random_is_not() {
    let bench = default_benchmark();
    let oracle = run_benchmark(&bench, &AgentConfig::new(AgentKind::Oracle), 4);
    let m = oracle.report.overall.clone().unwrap();
    assert_eq!(
        (m.success_rate, m.checkpoint_score),
        (Ratio::from_integer(1), Ratio::from_integer(1))
    );
    let random = run_benchmark(&bench, &AgentConfig::new(AgentKind::Random { seed: 3 }), 4);
    assert!(random.report.overall.unwrap().checkpoint_score < Ratio::new(5, 100));
    let table = oracle.report.render();
    let overall = table.lines().find(|l| l.starts_with("overall")).unwrap();
    assert_eq!(overall.matches("1.00").count(), 2, "{overall}");
}

#[test]
fn no_show_misses_only_the_meeting() {
    let s = noshow_fixture(21);
    let r = run(&s, AgentKind::NoShow, 0);
    let missed: Vec<_> = r
        .checkpoints
        .iter()
        .filter(|c| c.status != worksim_core::verifier::Status::Completed)
        .collect();
    assert!(!missed.is_empty());
    assert!(missed.iter().all(|c| c.kind == "meeting_attended"));
    assert_eq!(run(&s, AgentKind::Oracle, 0).score, Ratio::from_integer(1));
}

#[test]
fn website_feedback_is_verbatim() {
    let s = website_fixture(8);
    let r = browse_only(&s);
    assert_eq!(
        r.feedback.lines(),
        [
            "You should ask HR for the one who is responsible for maintaning the company website. Then he/she will help you solve the problem.",
            "You should inform the one who is mantaining the company website of the problem you discovered clearly, such as the website database is almost full.",
            "You should seek authorization from the Engineering Managers.",
        ]
    );
    assert!(r
        .feedback
        .render()
        .contains("Incompleted Checkpoints & Feedback"));
    assert!(run(&s, AgentKind::Oracle, 0).feedback.is_empty());
}

#[test]
fn experience_closes_the_npc_gap() {
    let t = run_two_day(
        &rules(&NPC_ASK_RULES),
        (31, 32),
        &AgentConfig::new(AgentKind::ExperienceFollowing),
        &VerbatimReflector,
    )
    .unwrap();
    let kinds: BTreeSet<_> = t
        .day1
        .report
        .checkpoints
        .iter()
        .filter(|c| c.status != worksim_core::verifier::Status::Completed)
        .map(|c| c.kind.as_str())
        .collect();
    assert_eq!(kinds, BTreeSet::from(["npc_asked"]));
    assert!(t.delta > Ratio::from_integer(0));
    assert_eq!(t.experiences.len(), t.day1.report.feedback.missed.len());
    assert!(t.day2.system_prompt.contains(LESSONS_HEADING));
    assert!(!t.day1.system_prompt.contains(LESSONS_HEADING));
    for e in &t.experiences {
        assert!(t.day2.system_prompt.contains(&e.insight));
    }
}

#[test]
fn perfect_day_leaves_no_lessons() {
    let t = run_two_day(
        &rules(&NPC_ASK_RULES),
        (31, 32),
        &AgentConfig::new(AgentKind::Oracle),
        &VerbatimReflector,
    )
    .unwrap();
    assert!(t.experiences.is_empty());
    assert!(!t.day2.system_prompt.contains(LESSONS_HEADING));
    assert!(run_two_day(
        &rules(&NPC_ASK_RULES),
        (5, 5),
        &AgentConfig::new(AgentKind::Oracle),
        &VerbatimReflector
    )
    .is_err());
}

#[test]
fn hint_tiers_are_monotone() {
    for seed in 0..6 {
        let scores = hinted_ads_scores(&ads_fixture(seed));
        assert!(
            scores.windows(2).all(|w| w[0] <= w[1]),
            "seed {seed}: {scores:?}"
        );
        assert_eq!(scores[3], "1.00", "seed {seed}");
        assert!(scores[0] < scores[3]);
    }
}

#[test]
fn hints_arrive_as_mentor_messages() {
    let s = Arc::new(ads_fixture(2));
    let (mut session, _) = Session::new("hint", s.clone());
    session.inject_hint(1, tier_hint(&s, 1).unwrap()).unwrap();
    let obs = session
        .act(&ToolCall::new("TakeNote").arg("content", "start"))
        .unwrap();
    let mentor = format!("New message from {MENTOR}:");
    assert!(obs.notices.iter().any(|n| n.text.starts_with(&mentor)));
    assert_eq!(
        session.inject_hint(0, "less").unwrap_err(),
        SessionError::TierRegression { last: 1, got: 0 }
    );
    assert_eq!(
        session.inject_hint(4, "more").unwrap_err(),
        SessionError::TierRange(4)
    );
}

#[test]
fn sessions_finalize_once() {
    let s = Arc::new(noshow_fixture(4));
    let (mut session, _) = Session::new("fin", s);
    session.act(&ToolCall::new("ListContacts")).unwrap();
    let a = session.finalize().unwrap();
    let b = session.finalize().unwrap();
    assert_eq!(a, b);
    assert_eq!(
        session.act(&ToolCall::new("ListContacts")).unwrap_err(),
        SessionError::Finalized
    );
    assert_eq!(
        session.inject_hint(1, "x").unwrap_err(),
        SessionError::Finalized
    );
    let seqs: Vec<u64> = session.events.iter().map(|e| e.seq).collect();
    assert_eq!(seqs, (0..seqs.len() as u64).collect::<Vec<_>>());
    assert_eq!(session.events.last().unwrap().kind, "finalized");
    assert_eq!(
        session
            .events
            .iter()
            .filter(|e| e.kind == "finalized")
            .count(),
        1
    );
}

#[test]
fn replay_reproduces_reports() {
    let bench = default_benchmark();
    let config = AgentConfig::new(AgentKind::Random { seed: 11 });
    let run = run_benchmark(&bench, &config, 8);
    for ((s, log), ep) in bench
        .scenarios
        .iter()
        .zip(&run.logs)
        .zip(&run.report.episodes)
        .take(10)
    {
        let text = log.to_jsonl();
        let parsed = EpisodeLog::from_jsonl(&text).unwrap();
        assert_eq!(&parsed, log);
        assert_eq!(
            replay(Arc::new(s.clone()), &parsed).unwrap().to_bytes(),
            ep.to_bytes()
        );
    }
    let hinted = Arc::new(ads_fixture(3));
    let ep = run_scenario(
        hinted.clone(),
        &AgentConfig::new(AgentKind::HintFollowing),
        1,
        &RunOptions {
            hint_tier: 3,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(
        replay(hinted.clone(), &ep.log).unwrap().to_bytes(),
        ep.report.to_bytes()
    );
    let other = Arc::new(ads_fixture(4));
    assert!(replay(other, &ep.log).is_err());
}

#[test]
fn parallelism_does_not_change_results() {
    let bench = default_benchmark();
    let config = AgentConfig::new(AgentKind::Random { seed: 2 });
    let a = run_benchmark(&bench, &config, 1);
    let b = run_benchmark(&bench, &config, 8);
    assert_eq!(a.report.to_bytes(), b.report.to_bytes());
    let logs = |r: &BenchmarkRun| r.logs.iter().map(EpisodeLog::to_jsonl).collect::<Vec<_>>();
    assert_eq!(logs(&a), logs(&b));
}

#[test]
fn scripted_model_matches_the_oracle() {
    let s = Arc::new(noshow_fixture(6));
    let config = AgentConfig::new(AgentKind::Model {
        backend: BackendConfig::Scripted,
        history_threshold: 4000,
    });
    let ep = run_scenario(s, &config, 1, &RunOptions::default()).unwrap();
    assert_eq!(ep.report.score, Ratio::from_integer(1));
}

#[test]
fn mock_misses_burn_the_step_budget() {
    let s = Arc::new(website_fixture(1));
    let mut config = AgentConfig::new(AgentKind::Model {
        backend: BackendConfig::Mock {
            table: Default::default(),
        },
        history_threshold: 2000,
    });
    config.step_budget = 15;
    let ep = run_scenario(s, &config, 1, &RunOptions::default()).unwrap();
    assert_eq!(ep.end, EndReason::StepBudget);
    assert_eq!(ep.report.counters.steps, 15);
    assert_eq!(ep.report.counters.tool_calls, 0);
    assert_eq!(ep.report.score, Ratio::from_integer(0));
}

struct Garbled;

impl Agent for Garbled {
    fn name(&self) -> String {
        "garbled".into()
    }
    fn begin(&mut self, _: &EpisodeStart<'_>) {}
    fn next(&mut self, _: &[Observation]) -> Result<Reply, BackendError> {
        Ok(Reply::Unparseable {
            text: "no calls here".into(),
            reason: "missing block".into(),
        })
    }
}

#[test]
fn unparseable_turns_count_as_steps() {
    let s = Arc::new(website_fixture(2));
    let (mut session, _) = Session::new("garbled", s.clone());
    let opts = RunOptions {
        step_budget: Some(7),
        ..Default::default()
    };
    let ep = run_episode(&mut Garbled, &mut session, &opts).unwrap();
    assert_eq!(ep.report.counters.steps, 7);
    assert!(ep.trajectory.steps.iter().all(|s| s.unparseable));
    assert_eq!(replay(s, &ep.log).unwrap().to_bytes(), ep.report.to_bytes());
}

#[test]
fn unreachable_model_aborts_the_episode() {
    let s = Arc::new(website_fixture(3));
    let config = AgentConfig::new(AgentKind::Model {
        backend: BackendConfig::Remote {
            endpoint: Some("http://127.0.0.1:9".into()),
            model: Some("none".into()),
            retries: Some(2),
        },
        history_threshold: 2000,
    });
    let ep = run_scenario(s, &config, 1, &RunOptions::default()).unwrap();
    assert_eq!(ep.end, EndReason::Aborted);
    let why = ep.report.aborted.expect("abort reason");
    assert!(why.contains('2'), "{why}");
    assert_eq!(ep.report.score, Ratio::from_integer(0));
}

#[test]
fn history_stays_bounded() {
    let threshold = 3000;
    let mut history = Vec::new();
    let mut peak = 0;
    for i in 0..1000usize {
        let entry = HistoryEntry::Exchange {
            response: format!("<tool_call>{{\"name\":\"ReadFile\",\"arguments\":{{\"path\":\"f{i}\"}}}}</tool_call>"),
            results: vec![ResultLine {
                tool: "ReadFile".into(),
                ok: i % 3 != 0,
                text: "row ".repeat(10 + i % 90),
            }],
            observation: format!("[10:{:02}] result {}\n- [T{}] open", i % 60, "x".repeat(i % 400), i % 5 + 1),
        };
        history = maintain_history(history, entry.clone(), threshold);
        assert_eq!(history.last(), Some(&entry));
        assert!(
            history
                .iter()
                .filter(|h| matches!(h, HistoryEntry::Digest(_)))
                .count()
                <= 1
        );
        peak = peak.max(total_tokens(&history));
    }
    assert!(peak <= threshold + 1500, "peak {peak}");
    assert!(matches!(&history[0], HistoryEntry::Digest(d) if d.folded > 900));
}
