//! Python bindings: rule catalog, benchmark generation, interactive
//! sessions, batch runs and scoring.

use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pythonize::{depythonize, pythonize};
use serde::Serialize;
use worksim_core::harness::{replay, run_benchmark, tier_hint, AgentConfig, EpisodeLog};
use worksim_core::metatask::{find_rule, list_rules, RuleFilter};
use worksim_core::scenario::{self, Benchmark, Scenario};
use worksim_core::session;
use worksim_core::verifier::{self, BenchmarkReport, EpisodeReport, Tally};
use worksim_core::world::ToolCall;

create_exception!(worksim, WorksimError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    WorksimError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize + ?Sized>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    pythonize(py, value).map_err(err)
}

fn utf8(bytes: Vec<u8>) -> String {
    String::from_utf8(bytes).expect("canonical json is utf-8")
}

/// Built-in rules, optionally filtered by `domain` and `difficulty`.
#[pyfunction]
#[pyo3(signature = (domain=None, difficulty=None))]
fn rules<'py>(
    py: Python<'py>,
    domain: Option<&Bound<'py, PyAny>>,
    difficulty: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let filter = RuleFilter {
        domain: domain.map(|d| depythonize(d)).transpose().map_err(err)?,
        difficulty: difficulty
            .map(|d| depythonize(d))
            .transpose()
            .map_err(err)?,
    };
    to_py(py, &list_rules(filter))
}

#[pyclass(name = "Benchmark", frozen)]
struct PyBenchmark {
    inner: Arc<Benchmark>,
}

#[pymethods]
impl PyBenchmark {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = Benchmark::from_bytes(text.as_bytes()).map_err(err)?;
        Ok(PyBenchmark {
            inner: Arc::new(inner),
        })
    }

    #[getter]
    fn benchmark_id(&self) -> &str {
        &self.inner.benchmark_id
    }

    #[getter]
    fn scenario_ids(&self) -> Vec<String> {
        self.inner
            .scenarios
            .iter()
            .map(|s| s.scenario_id.clone())
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.scenarios.len()
    }

    fn to_json(&self) -> String {
        utf8(self.inner.to_bytes())
    }

    /// Agent-facing view of one scenario; hidden state is never included.
    fn agent_view<'py>(&self, py: Python<'py>, scenario_id: &str) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.scenario(scenario_id)?.agent_view())
    }

    /// Opens an interactive session on a scenario.
    #[pyo3(signature = (scenario_id, agent="python", day=1))]
    fn session<'py>(
        &self,
        py: Python<'py>,
        scenario_id: &str,
        agent: &str,
        day: u32,
    ) -> PyResult<(PySession, Bound<'py, PyAny>)> {
        let s = Arc::new(self.scenario(scenario_id)?.clone());
        let (session, obs) = session::Session::new(&format!("py-{scenario_id}"), s);
        let session = session.with_agent(agent, day);
        Ok((
            PySession {
                inner: std::sync::Mutex::new(session),
            },
            to_py(py, &obs)?,
        ))
    }

    /// Mentor hint text for `tier` in a scenario, if any task defines one.
    fn hint_text(&self, scenario_id: &str, tier: u8) -> PyResult<Option<String>> {
        Ok(tier_hint(self.scenario(scenario_id)?, tier).map(str::to_string))
    }

    /// Runs a built-in agent over every scenario; `agent` is an agent
    /// config dict such as `{"kind": "random", "seed": 3}`.
    #[pyo3(signature = (agent, parallelism=4))]
    fn run<'py>(
        &self,
        py: Python<'py>,
        agent: &Bound<'py, PyAny>,
        parallelism: usize,
    ) -> PyResult<Bound<'py, PyAny>> {
        let config: AgentConfig = depythonize(agent).map_err(err)?;
        let bench = self.inner.clone();
        let run = py.detach(move || run_benchmark(&bench, &config, parallelism));
        to_py(py, &run.report)
    }

    /// Re-executes an episode log (JSON lines) and returns the report.
    fn replay<'py>(&self, py: Python<'py>, log: &str) -> PyResult<Bound<'py, PyAny>> {
        let log = EpisodeLog::from_jsonl(log).map_err(err)?;
        let Some(worksim_core::harness::LogRecord::Header { scenario_id, .. }) =
            log.records.first()
        else {
            return Err(err("log has no header"));
        };
        let s = Arc::new(self.scenario(scenario_id)?.clone());
        to_py(py, &replay(s, &log).map_err(err)?)
    }
}

impl PyBenchmark {
    fn scenario(&self, id: &str) -> PyResult<&Scenario> {
        self.inner
            .scenario(id)
            .ok_or_else(|| err(format!("unknown scenario `{id}`")))
    }
}

/// Generates a benchmark from the built-in rules, or from the named subset.
#[pyfunction]
#[pyo3(signature = (n, seed, k_min=scenario::DEFAULT_K_MIN, k_max=scenario::DEFAULT_K_MAX, rules=None))]
fn build_benchmark(
    py: Python<'_>,
    n: usize,
    seed: u64,
    k_min: usize,
    k_max: usize,
    rules: Option<Vec<String>>,
) -> PyResult<PyBenchmark> {
    let ruleset = match rules {
        Some(ids) => ids
            .iter()
            .map(|id| find_rule(id).cloned().map_err(err))
            .collect::<PyResult<Vec<_>>>()?,
        None => list_rules(RuleFilter::default()),
    };
    let b = py
        .detach(|| scenario::build_benchmark(&ruleset, n, k_min, k_max, seed))
        .map_err(err)?;
    Ok(PyBenchmark { inner: Arc::new(b) })
}

#[pyclass(name = "Session", frozen)]
struct PySession {
    inner: std::sync::Mutex<session::Session>,
}

impl PySession {
    fn lock(&self) -> std::sync::MutexGuard<'_, session::Session> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }
}

#[pymethods]
impl PySession {
    /// One step with a single call: `act("ReadFile", path="a.csv")`.
    #[pyo3(signature = (name, **arguments))]
    fn act<'py>(
        &self,
        py: Python<'py>,
        name: &str,
        arguments: Option<&Bound<'py, pyo3::types::PyDict>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let call = ToolCall {
            id: None,
            name: name.to_string(),
            arguments: match arguments {
                Some(a) => depythonize(a.as_any()).map_err(err)?,
                None => Default::default(),
            },
        };
        let obs = self.lock().act(&call).map_err(err)?;
        to_py(py, &obs)
    }

    /// One step with any number of calls, each `{"name": ..., "arguments": {...}}`.
    #[pyo3(signature = (thought, calls))]
    fn step<'py>(
        &self,
        py: Python<'py>,
        thought: &str,
        calls: &Bound<'py, PyAny>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let calls: Vec<ToolCall> = depythonize(calls).map_err(err)?;
        let obs = self.lock().step(thought, &calls).map_err(err)?;
        to_py(py, &obs)
    }

    fn hint(&self, tier: u8, text: &str) -> PyResult<()> {
        self.lock().inject_hint(tier, text).map_err(err)
    }

    /// Scores the episode; repeated calls return the same report.
    fn finalize<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let report = self.lock().finalize().map_err(err)?;
        to_py(py, &report)
    }

    #[getter]
    fn clock(&self) -> String {
        self.lock().clock().to_string()
    }

    #[getter]
    fn is_open(&self) -> bool {
        self.lock().is_open()
    }

    /// Ordered session events starting at `since`.
    #[pyo3(signature = (since=0))]
    fn events<'py>(&self, py: Python<'py>, since: usize) -> PyResult<Bound<'py, PyAny>> {
        let s = self.lock();
        to_py(py, &s.events[since.min(s.events.len())..])
    }
}

/// Mean per-task completion ratio over `(completed, total)` pairs, as an
/// exact `(numerator, denominator)`.
#[pyfunction]
fn score(tasks: Vec<(usize, usize)>) -> PyResult<(i64, i64)> {
    let tallies: Vec<Tally> = tasks
        .into_iter()
        .map(|(completed, total)| Tally { completed, total })
        .collect();
    let s = verifier::score(&tallies).map_err(err)?;
    Ok((*s.numer(), *s.denom()))
}

/// Aggregates episode report dicts, as returned by `Session.finalize`.
#[pyfunction]
fn aggregate<'py>(
    py: Python<'py>,
    benchmark_id: &str,
    agent: &str,
    episodes: &Bound<'py, PyAny>,
) -> PyResult<Bound<'py, PyAny>> {
    let episodes: Vec<EpisodeReport> = depythonize(episodes).map_err(err)?;
    to_py(py, &BenchmarkReport::new(benchmark_id, agent, episodes))
}

#[pymodule]
fn worksim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("WorksimError", m.py().get_type::<WorksimError>())?;
    m.add_class::<PyBenchmark>()?;
    m.add_class::<PySession>()?;
    m.add_function(wrap_pyfunction!(rules, m)?)?;
    m.add_function(wrap_pyfunction!(build_benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate, m)?)?;
    Ok(())
}
