//! HTTP protocol server: session lifecycle, actions, hints and a server-sent
//! event stream per session.

use std::collections::{BTreeMap, HashMap};
use std::convert::Infallible;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::watch;
use worksim_core::harness::{EndReason, EpisodeLog};
use worksim_core::metatask::{find_rule, list_rules, MetaTaskRule, RuleFilter};
use worksim_core::scenario::{build_benchmark, Benchmark, Scenario, DEFAULT_K_MAX, DEFAULT_K_MIN};
use worksim_core::session::{Phase, Session, SessionError, SessionEvent};
use worksim_core::tools;
use worksim_core::verifier::EpisodeReport;
use worksim_core::world::{Observation, ToolCall};

pub const API_VERSION: u32 = 1;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("unknown {what} `{id}`"),
        )
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let code = match e {
            SessionError::Finalized => "finalized",
            SessionError::TierRegression { .. } => "tier_regression",
            SessionError::TierRange(_) => "tier_range",
            SessionError::Score(_) => "score",
        };
        let status = match e {
            SessionError::Score(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::CONFLICT,
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"error": {"code": self.code, "message": self.message}});
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

struct SessionSlot {
    session: Mutex<Session>,
    /// Number of events published so far.
    published: watch::Sender<u64>,
}

impl SessionSlot {
    /// Runs `f` under the session lock, then wakes stream readers.
    fn with<T>(&self, f: impl FnOnce(&mut Session) -> T) -> T {
        let mut s = self.session.lock().expect("session lock");
        let out = f(&mut s);
        self.published.send_replace(s.events.len() as u64);
        out
    }
}

pub struct AppState {
    data_dir: Option<PathBuf>,
    scenarios: RwLock<BTreeMap<String, Arc<Scenario>>>,
    benchmarks: RwLock<BTreeMap<String, Vec<String>>>,
    sessions: RwLock<HashMap<String, Arc<SessionSlot>>>,
    next_session: AtomicU64,
}

impl AppState {
    pub fn new(data_dir: Option<PathBuf>) -> Self {
        AppState {
            data_dir,
            scenarios: RwLock::default(),
            benchmarks: RwLock::default(),
            sessions: RwLock::default(),
            next_session: AtomicU64::new(1),
        }
    }

    pub fn add_benchmark(&self, b: &Benchmark) {
        let mut scenarios = self.scenarios.write().expect("lock");
        for s in &b.scenarios {
            scenarios.insert(s.scenario_id.clone(), Arc::new(s.clone()));
        }
        let ids = b.scenarios.iter().map(|s| s.scenario_id.clone()).collect();
        self.benchmarks
            .write()
            .expect("lock")
            .insert(b.benchmark_id.clone(), ids);
    }

    pub fn add_scenario(&self, s: Scenario) {
        self.scenarios
            .write()
            .expect("lock")
            .insert(s.scenario_id.clone(), Arc::new(s));
    }

    /// Loads every benchmark or scenario file found in `dir`.
    pub fn load_dir(&self, dir: &Path) -> anyhow::Result<usize> {
        let mut n = 0;
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let bytes = std::fs::read(&path)?;
            if let Ok(b) = Benchmark::from_bytes(&bytes) {
                n += b.scenarios.len();
                self.add_benchmark(&b);
            } else if let Ok(s) = Scenario::from_bytes(&bytes) {
                n += 1;
                self.add_scenario(s);
            }
        }
        Ok(n)
    }

    fn scenario(&self, id: &str) -> Result<Arc<Scenario>, ApiError> {
        self.scenarios
            .read()
            .expect("lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("scenario", id))
    }

    fn slot(&self, id: &str) -> Result<Arc<SessionSlot>, ApiError> {
        self.sessions
            .read()
            .expect("lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("session", id))
    }

    fn persist(
        &self,
        session_id: &str,
        report: &EpisodeReport,
        log: &EpisodeLog,
    ) -> std::io::Result<()> {
        let Some(dir) = &self.data_dir else {
            return Ok(());
        };
        let dir = dir.join("sessions");
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join(format!("{session_id}.json")), report.to_bytes())?;
        std::fs::write(dir.join(format!("{session_id}.jsonl")), log.to_jsonl())
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/tools", get(tool_catalog))
        .route("/v1/rules", get(rules))
        .route("/v1/benchmarks", post(create_benchmark))
        .route("/v1/benchmarks/{id}", get(get_benchmark))
        .route("/v1/scenarios/{id}", get(get_scenario))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/observation", get(observe))
        .route("/v1/sessions/{id}/act", post(act))
        .route("/v1/sessions/{id}/hint", post(hint))
        .route("/v1/sessions/{id}/finalize", post(finalize))
        .route("/v1/sessions/{id}/log", get(episode_log))
        .route("/v1/sessions/{id}/events", get(events))
        .with_state(state)
}

async fn health() -> Json<Value> {
    Json(json!({"status": "ok", "api_version": API_VERSION}))
}

async fn tool_catalog() -> Json<Value> {
    Json(json!({"api_version": API_VERSION, "tools": tools::catalog()}))
}

#[derive(Serialize)]
struct RuleSummary {
    rule_id: String,
    title: String,
    domain: worksim_core::metatask::Domain,
    difficulty: worksim_core::metatask::Difficulty,
    time_critical: bool,
}

async fn rules(axum::extract::Query(filter): axum::extract::Query<RuleFilter>) -> Json<Value> {
    let rules: Vec<RuleSummary> = list_rules(filter)
        .into_iter()
        .map(|r| RuleSummary {
            rule_id: r.rule_id,
            title: r.title,
            domain: r.domain,
            difficulty: r.difficulty,
            time_critical: r.time_critical,
        })
        .collect();
    Json(json!({"api_version": API_VERSION, "rules": rules}))
}

#[derive(Deserialize)]
struct BenchmarkRequest {
    #[serde(default = "default_n")]
    n: usize,
    seed: u64,
    #[serde(default = "default_k_min")]
    k_min: usize,
    #[serde(default = "default_k_max")]
    k_max: usize,
    #[serde(default)]
    rules: Option<Vec<String>>,
}

fn default_n() -> usize {
    worksim_core::scenario::DEFAULT_SCENARIOS
}

fn default_k_min() -> usize {
    DEFAULT_K_MIN
}

fn default_k_max() -> usize {
    DEFAULT_K_MAX
}

#[derive(Serialize)]
struct BenchmarkSummary {
    api_version: u32,
    benchmark_id: String,
    scenarios: Vec<String>,
}

async fn create_benchmark(
    State(app): State<Arc<AppState>>,
    Json(req): Json<BenchmarkRequest>,
) -> ApiResult<BenchmarkSummary> {
    let ruleset: Vec<MetaTaskRule> = match &req.rules {
        Some(ids) => ids
            .iter()
            .map(|id| {
                find_rule(id)
                    .cloned()
                    .map_err(|e| ApiError::bad_request(e.to_string()))
            })
            .collect::<Result<_, _>>()?,
        None => list_rules(RuleFilter::default()),
    };
    let b = tokio::task::spawn_blocking(move || {
        build_benchmark(&ruleset, req.n, req.k_min, req.k_max, req.seed)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
    .map_err(|e| ApiError::bad_request(e.to_string()))?;
    app.add_benchmark(&b);
    Ok(Json(BenchmarkSummary {
        api_version: API_VERSION,
        benchmark_id: b.benchmark_id.clone(),
        scenarios: b.scenarios.iter().map(|s| s.scenario_id.clone()).collect(),
    }))
}

async fn get_benchmark(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<BenchmarkSummary> {
    let scenarios = app
        .benchmarks
        .read()
        .expect("lock")
        .get(&id)
        .cloned()
        .ok_or_else(|| ApiError::not_found("benchmark", &id))?;
    Ok(Json(BenchmarkSummary {
        api_version: API_VERSION,
        benchmark_id: id,
        scenarios,
    }))
}

async fn get_scenario(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<worksim_core::scenario::AgentView> {
    Ok(Json(app.scenario(&id)?.agent_view()))
}

#[derive(Deserialize)]
struct CreateSession {
    #[serde(default)]
    scenario_id: Option<String>,
    #[serde(default)]
    benchmark_id: Option<String>,
    #[serde(default)]
    index: Option<usize>,
    #[serde(default)]
    agent: Option<String>,
    #[serde(default)]
    day: Option<u32>,
}

#[derive(Serialize)]
struct Created {
    api_version: u32,
    session_id: String,
    scenario_id: String,
    observation: Observation,
}

async fn create_session(
    State(app): State<Arc<AppState>>,
    Json(req): Json<CreateSession>,
) -> ApiResult<Created> {
    let scenario_id = match (&req.scenario_id, &req.benchmark_id) {
        (Some(id), _) => id.clone(),
        (None, Some(b)) => {
            let index = req
                .index
                .ok_or_else(|| ApiError::bad_request("`index` is required with `benchmark_id`"))?;
            let benchmarks = app.benchmarks.read().expect("lock");
            let ids = benchmarks
                .get(b)
                .ok_or_else(|| ApiError::not_found("benchmark", b))?;
            ids.get(index)
                .cloned()
                .ok_or_else(|| ApiError::not_found("scenario index", &index.to_string()))?
        }
        (None, None) => {
            return Err(ApiError::bad_request(
                "give `scenario_id` or `benchmark_id` with `index`",
            ))
        }
    };
    let scenario = app.scenario(&scenario_id)?;
    let n = app.next_session.fetch_add(1, Ordering::SeqCst);
    let session_id = format!("sess-{n:04}");
    let (session, observation) = Session::new(&session_id, scenario);
    let session = session.with_agent(
        req.agent.as_deref().unwrap_or("external"),
        req.day.unwrap_or(1),
    );
    let slot = Arc::new(SessionSlot {
        session: Mutex::new(session),
        published: watch::channel(0).0,
    });
    app.sessions
        .write()
        .expect("lock")
        .insert(session_id.clone(), slot);
    Ok(Json(Created {
        api_version: API_VERSION,
        session_id,
        scenario_id,
        observation,
    }))
}

#[derive(Serialize)]
struct SessionInfo {
    api_version: u32,
    session_id: String,
    scenario_id: String,
    agent: String,
    day: u32,
    phase: Phase,
    clock: worksim_core::time::SimTime,
    counters: worksim_core::trajectory::Counters,
    hints: Vec<worksim_core::session::Hint>,
    events: usize,
}

async fn get_session(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<SessionInfo> {
    let slot = app.slot(&id)?;
    let s = slot.session.lock().expect("session lock");
    Ok(Json(SessionInfo {
        api_version: API_VERSION,
        session_id: s.session_id.clone(),
        scenario_id: s.scenario.scenario_id.clone(),
        agent: s.agent.clone(),
        day: s.day,
        phase: s.phase,
        clock: s.clock(),
        counters: s.trajectory.counters,
        hints: s.hints.clone(),
        events: s.events.len(),
    }))
}

/// Current view: clock, released tasks, inbox size, catalog and contacts.
async fn observe(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Value> {
    let slot = app.slot(&id)?;
    let s = slot.session.lock().expect("session lock");
    let obs = Observation {
        persona: Some(s.scenario.persona.clone()),
        workday: Some(s.scenario.workday),
        tasks: s.state.released_briefs(),
        tools: tools::catalog(),
        contacts: s.state.contacts(),
        databases: s.state.databases(),
        ..Observation::at(s.clock())
    };
    Ok(Json(json!({
        "api_version": API_VERSION,
        "phase": s.phase,
        "observation": obs,
        "inbox": s.state.agent.inbox.len(),
    })))
}

#[derive(Deserialize)]
struct ActRequest {
    #[serde(default)]
    thought: String,
    #[serde(default)]
    tool_calls: Vec<ToolCall>,
    /// Single-call shorthand.
    #[serde(default)]
    call: Option<ToolCall>,
}

async fn act(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<ActRequest>,
) -> ApiResult<Value> {
    let slot = app.slot(&id)?;
    let mut calls = req.tool_calls;
    calls.extend(req.call);
    let observations = slot.with(|s| s.step(&req.thought, &calls))?;
    Ok(Json(
        json!({"api_version": API_VERSION, "observations": observations}),
    ))
}

#[derive(Deserialize)]
struct HintRequest {
    tier: u8,
    text: String,
}

async fn hint(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<HintRequest>,
) -> ApiResult<Value> {
    let slot = app.slot(&id)?;
    let hint = slot.with(|s| {
        s.inject_hint(req.tier, &req.text)?;
        Ok::<_, SessionError>(s.hints.last().cloned())
    })?;
    Ok(Json(
        json!({"api_version": API_VERSION, "ack": true, "hint": hint}),
    ))
}

async fn finalize(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<EpisodeReport> {
    let slot = app.slot(&id)?;
    let (report, log) = slot.with(|s| {
        let report = s.finalize()?;
        Ok::<_, SessionError>((report, session_log(s)))
    })?;
    app.persist(&id, &report, &log)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", e.to_string()))?;
    Ok(Json(report))
}

fn session_log(s: &Session) -> EpisodeLog {
    let aborted = s.report().and_then(|r| r.aborted.clone());
    let mut log = EpisodeLog::from_trajectory(
        &s.scenario.scenario_id,
        &s.agent,
        s.day,
        &s.trajectory,
        EndReason::Stopped,
        aborted,
    );
    if s.is_open() {
        log.records.pop();
    }
    log
}

async fn episode_log(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Response, ApiError> {
    let slot = app.slot(&id)?;
    let text = session_log(&slot.session.lock().expect("session lock")).to_jsonl();
    Ok((
        [(axum::http::header::CONTENT_TYPE, "application/x-ndjson")],
        text,
    )
        .into_response())
}

fn sse_event(e: &SessionEvent) -> Event {
    Event::default()
        .id(e.seq.to_string())
        .event(e.kind.clone())
        .data(serde_json::to_string(e).expect("event json"))
}

/// Full backlog, then live events; ends after the terminal event.
async fn events(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let slot = app.slot(&id)?;
    let rx = slot.published.subscribe();
    let stream = stream::unfold(
        (slot, rx, 0usize, false),
        |(slot, mut rx, cursor, done)| async move {
            if done {
                return None;
            }
            loop {
                let (batch, finished) = {
                    let s = slot.session.lock().expect("session lock");
                    (
                        s.events[cursor.min(s.events.len())..].to_vec(),
                        s.phase == Phase::Finalized,
                    )
                };
                if !batch.is_empty() {
                    let next = cursor + batch.len();
                    let ended = finished && batch.last().is_some_and(|e| e.kind == "finalized");
                    let items: Vec<Result<Event, Infallible>> =
                        batch.iter().map(|e| Ok(sse_event(e))).collect();
                    return Some((stream::iter(items), (slot, rx, next, ended)));
                }
                if finished || rx.changed().await.is_err() {
                    return None;
                }
            }
        },
    )
    .flatten();
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

/// Binds and serves until the process ends.
pub async fn serve(state: Arc<AppState>, port: u16) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
