use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use worksim_cli::server::{router, AppState};
use worksim_core::harness::agents::{EpisodeStart, Reply};
use worksim_core::harness::prompt::build_system_prompt;
use worksim_core::harness::{replay, tier_hint, AgentConfig, AgentKind, EpisodeLog};
use worksim_core::metatask::{find_rule, list_rules, RuleFilter};
use worksim_core::scenario::{build_benchmark, compose, Scenario};
use worksim_core::session::MENTOR;
use worksim_core::verifier::EpisodeReport;
use worksim_core::world::Observation;

fn scenario(rules: &[&str], seed: u64) -> Scenario {
    let picked: Vec<_> = rules
        .iter()
        .map(|r| find_rule(r).unwrap().clone())
        .collect();
    compose(&picked, seed).unwrap()
}

fn app_with(scenarios: &[&Scenario], data: Option<std::path::PathBuf>) -> Router {
    let state = AppState::new(data);
    for s in scenarios {
        state.add_scenario((*s).clone());
    }
    router(Arc::new(state))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    (
        status,
        res.into_body().collect().await.unwrap().to_bytes().to_vec(),
    )
}

async fn json_call(
    app: &Router,
    method: &str,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, uri, body).await;
    (
        status,
        serde_json::from_slice(&bytes).unwrap_or(Value::Null),
    )
}

async fn open(app: &Router, scenario_id: &str, agent: &str) -> String {
    let (status, v) = json_call(
        app,
        "POST",
        "/v1/sessions",
        Some(json!({"scenario_id": scenario_id, "agent": agent})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

/// SSE frames as (event name, data json).
fn parse_sse(text: &str) -> Vec<(String, Value)> {
    text.split("\n\n")
        .filter_map(|block| {
            let mut event = None;
            let mut data = None;
            for line in block.lines() {
                if let Some(v) = line.strip_prefix("event: ") {
                    event = Some(v.to_string());
                } else if let Some(v) = line.strip_prefix("data: ") {
                    data = Some(serde_json::from_str(v).unwrap());
                }
            }
            Some((event?, data?))
        })
        .collect()
}

/// Drives the built-in oracle over the wire until it stops.
async fn drive_oracle(app: &Router, s: &Scenario, id: &str, first: &Observation) {
    let mut agent = AgentConfig::new(AgentKind::Oracle).build(s).unwrap();
    let prompt = build_system_prompt(first, &s.persona, &[]);
    agent.begin(&EpisodeStart {
        scenario: s,
        observation: first,
        system_prompt: &prompt,
        experiences: &[],
    });
    let mut last = Vec::new();
    for _ in 0..200 {
        let body = match agent.next(&last).unwrap() {
            Reply::Act { thought, calls } => json!({"thought": thought, "tool_calls": calls}),
            Reply::Think { thought } => json!({"thought": thought}),
            Reply::Stop { .. } => return,
            Reply::Unparseable { .. } => unreachable!(),
        };
        let (status, v) =
            json_call(app, "POST", &format!("/v1/sessions/{id}/act"), Some(body)).await;
        if status == StatusCode::CONFLICT {
            return;
        }
        assert_eq!(status, StatusCode::OK, "{v}");
        last = serde_json::from_value(v["observations"].clone()).unwrap();
    }
    panic!("oracle never stopped");
}

#[tokio::test]
async fn unknown_ids_are_not_found() {
    let app = app_with(&[], None);
    for uri in [
        "/v1/sessions/nope",
        "/v1/scenarios/nope",
        "/v1/benchmarks/nope",
        "/v1/sessions/nope/events",
    ] {
        let (status, v) = json_call(&app, "GET", uri, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
        assert_eq!(v["error"]["code"], "not_found");
    }
    let (status, v) = json_call(&app, "POST", "/v1/sessions", Some(json!({}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "bad_request");
}

#[tokio::test]
async fn catalog_endpoints() {
    let app = app_with(&[], None);
    let (status, v) = json_call(&app, "GET", "/v1/health", None).await;
    assert_eq!((status, v["status"].as_str()), (StatusCode::OK, Some("ok")));
    let (_, v) = json_call(&app, "GET", "/v1/rules", None).await;
    assert_eq!(
        v["rules"].as_array().unwrap().len(),
        list_rules(RuleFilter::default()).len()
    );
    let (_, hard) = json_call(&app, "GET", "/v1/rules?difficulty=hard", None).await;
    let hard = hard["rules"].as_array().unwrap();
    assert!(!hard.is_empty() && hard.len() < v["rules"].as_array().unwrap().len());
    assert!(hard.iter().all(|r| r["difficulty"] == "hard"));
    let (_, tools) = json_call(&app, "GET", "/v1/tools", None).await;
    assert!(tools["tools"]
        .as_array()
        .unwrap()
        .iter()
        .any(|t| t["name"] == "BrowseWebsite"));
}

#[tokio::test]
async fn benchmarks_built_over_the_wire_match_the_library() {
    let app = app_with(&[], None);
    let (status, v) = json_call(
        &app,
        "POST",
        "/v1/benchmarks",
        Some(json!({"n": 4, "seed": 9})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let local = build_benchmark(&list_rules(RuleFilter::default()), 4, 2, 6, 9).unwrap();
    let ids: Vec<_> = local
        .scenarios
        .iter()
        .map(|s| s.scenario_id.clone())
        .collect();
    assert_eq!(v["scenarios"], json!(ids));
    let bid = v["benchmark_id"].as_str().unwrap();
    let (_, again) = json_call(&app, "GET", &format!("/v1/benchmarks/{bid}"), None).await;
    assert_eq!(again["scenarios"], v["scenarios"]);

    let (status, s) = json_call(
        &app,
        "POST",
        "/v1/sessions",
        Some(json!({"benchmark_id": bid, "index": 2})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(s["scenario_id"], json!(ids[2]));
    let (status, _) = json_call(
        &app,
        "POST",
        "/v1/sessions",
        Some(json!({"benchmark_id": bid, "index": 4})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = json_call(
        &app,
        "POST",
        "/v1/benchmarks",
        Some(json!({"n": 0, "seed": 1})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = json_call(
        &app,
        "POST",
        "/v1/benchmarks",
        Some(json!({"seed": 1, "rules": ["no_such_rule"]})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn agent_view_hides_clues() {
    let s = scenario(
        &[
            "website_monitoring",
            "transaction_auditing",
            "meeting_attendance",
        ],
        12,
    );
    let app = app_with(&[&s], None);
    let (status, bytes) = call(
        &app,
        "GET",
        &format!("/v1/scenarios/{}", s.scenario_id),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let text = String::from_utf8(bytes).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert!(v.get("hidden").is_none());
    assert_eq!(v, serde_json::to_value(s.agent_view()).unwrap());
    let id = open(&app, &s.scenario_id, "probe").await;
    let (_, obs) = call(&app, "GET", &format!("/v1/sessions/{id}/observation"), None).await;
    let obs = String::from_utf8(obs).unwrap();
    let clues: Vec<_> = s.clues().collect();
    assert!(!clues.is_empty());
    for c in clues {
        assert!(!text.contains(&c.content), "{} in agent view", c.clue_id);
        assert!(!obs.contains(&c.content), "{} in observation", c.clue_id);
    }
}

#[tokio::test]
async fn oracle_over_the_wire_scores_full_and_replays() {
    let s = scenario(&["website_monitoring", "data_completion"], 3);
    let dir = tempfile::tempdir().unwrap();
    let app = app_with(&[&s], Some(dir.path().to_path_buf()));
    let (_, created) = json_call(
        &app,
        "POST",
        "/v1/sessions",
        Some(json!({"scenario_id": s.scenario_id, "agent": "oracle"})),
    )
    .await;
    let id = created["session_id"].as_str().unwrap().to_string();
    let first: Observation = serde_json::from_value(created["observation"].clone()).unwrap();
    drive_oracle(&app, &s, &id, &first).await;

    let (status, bytes) = call(&app, "POST", &format!("/v1/sessions/{id}/finalize"), None).await;
    assert_eq!(status, StatusCode::OK);
    let report: EpisodeReport = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(report.score_display, "1.00");

    let (_, log) = call(&app, "GET", &format!("/v1/sessions/{id}/log"), None).await;
    let log = EpisodeLog::from_jsonl(std::str::from_utf8(&log).unwrap()).unwrap();
    let replayed = replay(Arc::new(s.clone()), &log).unwrap();
    assert_eq!(replayed, report);

    let stored = std::fs::read(dir.path().join("sessions").join(format!("{id}.json"))).unwrap();
    assert_eq!(stored, report.to_bytes());
    assert!(dir
        .path()
        .join("sessions")
        .join(format!("{id}.jsonl"))
        .exists());
}

#[tokio::test]
async fn finalize_is_idempotent_and_closes_the_session() {
    let s = scenario(&["contact_lookup"], 5);
    let app = app_with(&[&s], None);
    let id = open(&app, &s.scenario_id, "t").await;
    let act = json!({"call": {"name": "ListContacts", "arguments": {}}});
    let (status, v) = json_call(
        &app,
        "POST",
        &format!("/v1/sessions/{id}/act"),
        Some(act.clone()),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["observations"].as_array().unwrap().len(), 1);
    let (_, a) = call(&app, "POST", &format!("/v1/sessions/{id}/finalize"), None).await;
    let (_, b) = call(&app, "POST", &format!("/v1/sessions/{id}/finalize"), None).await;
    assert_eq!(a, b);
    let (status, v) = json_call(&app, "POST", &format!("/v1/sessions/{id}/act"), Some(act)).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["error"]["code"], "finalized");
    let (_, info) = json_call(&app, "GET", &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(info["phase"], "finalized");
    assert_eq!(info["counters"]["steps"], 1);
}

#[tokio::test]
async fn sessions_are_independent() {
    let s = scenario(&["contact_lookup", "data_completion"], 8);
    let app = app_with(&[&s], None);
    let a = open(&app, &s.scenario_id, "a").await;
    let b = open(&app, &s.scenario_id, "b").await;
    assert_ne!(a, b);
    for _ in 0..3 {
        let body = json!({"call": {"name": "ListContacts", "arguments": {}}});
        json_call(&app, "POST", &format!("/v1/sessions/{a}/act"), Some(body)).await;
    }
    let (_, ia) = json_call(&app, "GET", &format!("/v1/sessions/{a}"), None).await;
    let (_, ib) = json_call(&app, "GET", &format!("/v1/sessions/{b}"), None).await;
    assert_eq!(ia["counters"]["steps"], 3);
    assert_eq!(ib["counters"]["steps"], 0);
    assert_ne!(ia["clock"], ib["clock"]);
    json_call(&app, "POST", &format!("/v1/sessions/{a}/finalize"), None).await;
    let (status, _) = json_call(
        &app,
        "POST",
        &format!("/v1/sessions/{b}/act"),
        Some(json!({"thought": "still here"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn hints_are_mentor_messages_with_rising_tiers() {
    let s = scenario(&["ads_campaign_planning"], 2);
    let app = app_with(&[&s], None);
    let id = open(&app, &s.scenario_id, "h").await;
    let text = tier_hint(&s, 2).unwrap();
    let (status, v) = json_call(
        &app,
        "POST",
        &format!("/v1/sessions/{id}/hint"),
        Some(json!({"tier": 2, "text": text})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["ack"], true);
    assert_eq!(v["hint"]["tier"], 2);
    let (status, v) = json_call(
        &app,
        "POST",
        &format!("/v1/sessions/{id}/hint"),
        Some(json!({"tier": 1, "text": "x"})),
    )
    .await;
    assert_eq!(
        (status, v["error"]["code"].as_str()),
        (StatusCode::CONFLICT, Some("tier_regression"))
    );
    let (status, v) = json_call(
        &app,
        "POST",
        &format!("/v1/sessions/{id}/hint"),
        Some(json!({"tier": 9, "text": "x"})),
    )
    .await;
    assert_eq!(
        (status, v["error"]["code"].as_str()),
        (StatusCode::CONFLICT, Some("tier_range"))
    );

    let (_, v) = json_call(
        &app,
        "POST",
        &format!("/v1/sessions/{id}/act"),
        Some(json!({"call": {"name": "TakeNote", "arguments": {"text": "start"}}})),
    )
    .await;
    let notices = v["observations"].to_string();
    assert!(
        notices.contains(&format!("New message from {MENTOR}:")),
        "{notices}"
    );

    json_call(&app, "POST", &format!("/v1/sessions/{id}/finalize"), None).await;
    let (_, log) = call(&app, "GET", &format!("/v1/sessions/{id}/log"), None).await;
    let log = EpisodeLog::from_jsonl(std::str::from_utf8(&log).unwrap()).unwrap();
    let (_, report) = call(&app, "POST", &format!("/v1/sessions/{id}/finalize"), None).await;
    assert_eq!(
        replay(Arc::new(s), &log).unwrap().to_bytes(),
        serde_json::from_slice::<EpisodeReport>(&report)
            .unwrap()
            .to_bytes()
    );
}

#[tokio::test]
async fn event_stream_replays_backlog_and_ends_with_the_report() {
    let s = scenario(&["contact_lookup", "meeting_attendance"], 4);
    let app = app_with(&[&s], None);
    let id = open(&app, &s.scenario_id, "sse").await;
    json_call(
        &app,
        "POST",
        &format!("/v1/sessions/{id}/act"),
        Some(json!({"call": {"name": "ListContacts", "arguments": {}}})),
    )
    .await;
    let (_, report) = json_call(&app, "POST", &format!("/v1/sessions/{id}/finalize"), None).await;
    let (status, bytes) = call(&app, "GET", &format!("/v1/sessions/{id}/events"), None).await;
    assert_eq!(status, StatusCode::OK);
    let events = parse_sse(std::str::from_utf8(&bytes).unwrap());
    let seqs: Vec<u64> = events
        .iter()
        .map(|(_, d)| d["seq"].as_u64().unwrap())
        .collect();
    assert_eq!(seqs, (0..seqs.len() as u64).collect::<Vec<_>>());
    let kinds: Vec<&str> = events.iter().map(|(k, _)| k.as_str()).collect();
    assert!(kinds.contains(&"tool_result") && kinds.contains(&"step"));
    let (last, data) = events.last().unwrap();
    assert_eq!(last, "finalized");
    assert_eq!(data["data"], report);
}

#[tokio::test]
async fn event_stream_tails_live_sessions() {
    let s = scenario(&["contact_lookup"], 6);
    let app = app_with(&[&s], None);
    let id = open(&app, &s.scenario_id, "live").await;
    let req = Request::get(format!("/v1/sessions/{id}/events"))
        .body(Body::empty())
        .unwrap();
    let mut body = app.clone().oneshot(req).await.unwrap().into_body();

    let reader = tokio::spawn(async move {
        let mut text = String::new();
        while let Some(frame) = body.frame().await {
            if let Ok(data) = frame.unwrap().into_data() {
                text.push_str(std::str::from_utf8(&data).unwrap());
            }
        }
        text
    });
    for _ in 0..2 {
        json_call(
            &app,
            "POST",
            &format!("/v1/sessions/{id}/act"),
            Some(json!({"call": {"name": "ListContacts", "arguments": {}}})),
        )
        .await;
    }
    json_call(&app, "POST", &format!("/v1/sessions/{id}/finalize"), None).await;
    let text = tokio::time::timeout(std::time::Duration::from_secs(10), reader)
        .await
        .unwrap()
        .unwrap();
    let events = parse_sse(&text);
    assert_eq!(events.iter().filter(|(k, _)| k == "step").count(), 2);
    assert_eq!(events.last().unwrap().0, "finalized");
}
