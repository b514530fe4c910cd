//! File-level operations behind each subcommand.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use serde::Deserialize;
use worksim_core::harness::{
    replay, run_benchmark, run_scenario, AgentConfig, EpisodeLog, RunOptions,
};
use worksim_core::metatask::{find_rule, list_rules, MetaTaskRule, RuleFilter};
use worksim_core::scenario::{build_benchmark, Benchmark};
use worksim_core::verifier::{BenchmarkReport, EpisodeReport};

pub const BENCHMARK_FILE: &str = "benchmark.json";
pub const REPORT_FILE: &str = "benchmark_report.json";

#[derive(Deserialize)]
struct Ruleset {
    rules: Vec<String>,
}

fn read(path: &Path) -> anyhow::Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn parse_manifest(bytes: &[u8], path: &Path) -> anyhow::Result<MetaTaskRule> {
    let rule: MetaTaskRule =
        serde_json::from_slice(bytes).with_context(|| format!("parsing {}", path.display()))?;
    let problems = rule.problems();
    if !problems.is_empty() {
        bail!("{}: {}", path.display(), problems.join("; "));
    }
    Ok(rule)
}

/// Rules from a manifest file, a directory of manifests, or a ruleset file
/// naming built-in rules as `{"rules": [...]}` (JSON or TOML). `None`
/// selects every built-in rule.
pub fn load_rules(path: Option<&Path>) -> anyhow::Result<Vec<MetaTaskRule>> {
    let Some(path) = path else {
        return Ok(list_rules(RuleFilter::default()));
    };
    if path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()?;
        files.retain(|p| p.extension().and_then(|e| e.to_str()) == Some("json"));
        files.sort();
        let rules = files
            .iter()
            .map(|p| parse_manifest(&read(p)?, p))
            .collect::<anyhow::Result<Vec<_>>>()?;
        if rules.is_empty() {
            bail!("no rule manifests in {}", path.display());
        }
        return Ok(rules);
    }
    let bytes = read(path)?;
    let text = String::from_utf8_lossy(&bytes);
    let ids = match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => Some(toml::from_str::<Ruleset>(&text)?.rules),
        _ => serde_json::from_slice::<Ruleset>(&bytes)
            .ok()
            .map(|r| r.rules),
    };
    match ids {
        Some(ids) => ids
            .iter()
            .map(|id| find_rule(id).cloned().map_err(|e| anyhow!(e)))
            .collect(),
        None => Ok(vec![parse_manifest(&bytes, path)?]),
    }
}

pub fn generate(
    rules: &[MetaTaskRule],
    n: usize,
    k_min: usize,
    k_max: usize,
    seed: u64,
    out: &Path,
) -> anyhow::Result<Benchmark> {
    let b = build_benchmark(rules, n, k_min, k_max, seed)?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join(BENCHMARK_FILE), b.to_bytes())?;
    Ok(b)
}

/// Reads a benchmark file, or `benchmark.json` inside a directory.
pub fn load_benchmark(path: &Path) -> anyhow::Result<Benchmark> {
    let file = if path.is_dir() {
        path.join(BENCHMARK_FILE)
    } else {
        path.to_path_buf()
    };
    Benchmark::from_bytes(&read(&file)?).map_err(|e| anyhow!("{}: {e}", file.display()))
}

pub fn load_agent(path: &Path) -> anyhow::Result<AgentConfig> {
    let text = String::from_utf8(read(path)?)?;
    Ok(match path.extension().and_then(|e| e.to_str()) {
        Some("json") => serde_json::from_str(&text)?,
        _ => toml::from_str(&text)?,
    })
}

/// Runs every scenario and writes reports, logs and the aggregate under `out`.
pub fn run(
    benchmark: &Benchmark,
    agent: &AgentConfig,
    parallelism: usize,
    hint_tier: u8,
    out: &Path,
) -> anyhow::Result<BenchmarkReport> {
    let (episodes, logs) = if hint_tier == 0 {
        let r = run_benchmark(benchmark, agent, parallelism);
        (r.report.episodes, r.logs)
    } else {
        let opts = RunOptions {
            hint_tier,
            ..Default::default()
        };
        let mut episodes = Vec::new();
        let mut logs = Vec::new();
        for s in &benchmark.scenarios {
            let ep = run_scenario(Arc::new(s.clone()), agent, 1, &opts)?;
            episodes.push(ep.report);
            logs.push(ep.log);
        }
        (episodes, logs)
    };
    let report = BenchmarkReport::new(&benchmark.benchmark_id, &agent.label(), episodes);
    let ep_dir = out.join("episodes");
    let log_dir = out.join("logs");
    std::fs::create_dir_all(&ep_dir)?;
    std::fs::create_dir_all(&log_dir)?;
    for (e, log) in report.episodes.iter().zip(&logs) {
        std::fs::write(ep_dir.join(format!("{}.json", e.scenario_id)), e.to_bytes())?;
        std::fs::write(
            log_dir.join(format!("{}.jsonl", e.scenario_id)),
            log.to_jsonl(),
        )?;
    }
    std::fs::write(out.join(REPORT_FILE), report.to_bytes())?;
    Ok(report)
}

/// Aggregates every episode report in `dir`, ordered by file name.
pub fn score(dir: &Path) -> anyhow::Result<BenchmarkReport> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    files.retain(|p| p.extension().and_then(|e| e.to_str()) == Some("json"));
    files.sort();
    let episodes = files
        .iter()
        .map(|p| EpisodeReport::from_bytes(&read(p)?).map_err(|e| anyhow!("{}: {e}", p.display())))
        .collect::<anyhow::Result<Vec<_>>>()?;
    if episodes.is_empty() {
        bail!("no episode reports in {}", dir.display());
    }
    let agents: std::collections::BTreeSet<&str> =
        episodes.iter().map(|e| e.agent.as_str()).collect();
    let agent = agents.into_iter().collect::<Vec<_>>().join("+");
    let id = dir
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("episodes")
        .to_string();
    Ok(BenchmarkReport::new(&id, &agent, episodes))
}

pub fn load_report(path: &Path) -> anyhow::Result<BenchmarkReport> {
    let file = if path.is_dir() {
        path.join(REPORT_FILE)
    } else {
        path.to_path_buf()
    };
    BenchmarkReport::from_bytes(&read(&file)?).map_err(|e| anyhow!("{}: {e}", file.display()))
}

/// Re-executes a log against its scenario from `benchmark`.
pub fn replay_log(benchmark: &Benchmark, log_path: &Path) -> anyhow::Result<EpisodeReport> {
    let text = String::from_utf8(read(log_path)?)?;
    let log = EpisodeLog::from_jsonl(&text)?;
    let Some(worksim_core::harness::LogRecord::Header { scenario_id, .. }) = log.records.first()
    else {
        bail!("log has no header");
    };
    let scenario = benchmark.scenario(scenario_id).ok_or_else(|| {
        anyhow!(
            "scenario {scenario_id} is not in {}",
            benchmark.benchmark_id
        )
    })?;
    Ok(replay(Arc::new(scenario.clone()), &log)?)
}
