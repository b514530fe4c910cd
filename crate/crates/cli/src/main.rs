use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::bail;
use clap::{Parser, Subcommand};
use worksim_cli::commands;
use worksim_cli::server::{self, AppState};
use worksim_core::harness::{AgentConfig, AgentKind};
use worksim_core::scenario::{DEFAULT_K_MAX, DEFAULT_K_MIN, DEFAULT_SCENARIOS};

#[derive(Parser)]
#[command(
    name = "worksim",
    version,
    about = "Seeded workplace simulation for tool-using agents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in meta-task rules.
    Rules {
        /// Print full rule manifests instead of a summary.
        #[arg(long)]
        json: bool,
    },
    /// Build a benchmark file.
    Gen {
        /// Rule manifest, manifest directory, or ruleset file.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SCENARIOS)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_K_MIN)]
        k_min: usize,
        #[arg(long, default_value_t = DEFAULT_K_MAX)]
        k_max: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an agent over every scenario of a benchmark.
    Run {
        #[arg(long)]
        benchmark: PathBuf,
        /// Agent config file (TOML or JSON); omit together with --kind.
        #[arg(long)]
        agent: Option<PathBuf>,
        /// Built-in agent: oracle, no_show, random, experience_following, hint_following.
        #[arg(long, conflicts_with = "agent")]
        kind: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        parallelism: usize,
        /// Mentor hint tier injected at the start of each episode.
        #[arg(long, default_value_t = 0)]
        hint_tier: u8,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate a directory of episode reports.
    Score {
        episodes: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Print a benchmark report.
    Report {
        report: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Re-execute an episode log and print the resulting report.
    Replay {
        #[arg(long)]
        benchmark: PathBuf,
        #[arg(long)]
        log: PathBuf,
        /// Fail unless the replayed report equals this file byte for byte.
        #[arg(long)]
        check: Option<PathBuf>,
    },
    /// Serve the HTTP protocol.
    Serve {
        #[arg(long, default_value_t = 8700)]
        port: u16,
        /// Benchmarks to preload; finalized sessions are stored here too.
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

fn builtin(kind: &str, seed: u64) -> anyhow::Result<AgentConfig> {
    Ok(AgentConfig::new(match kind {
        "oracle" => AgentKind::Oracle,
        "no_show" => AgentKind::NoShow,
        "random" => AgentKind::Random { seed },
        "experience_following" => AgentKind::ExperienceFollowing,
        "hint_following" => AgentKind::HintFollowing,
        other => bail!("unknown agent kind `{other}`"),
    }))
}

/// Writes to stdout; a closed pipe ends output quietly.
fn emit(text: &str) -> anyhow::Result<()> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn text(bytes: Vec<u8>) -> String {
    String::from_utf8(bytes).expect("canonical json is utf-8")
}

fn execute(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Rules { json } => {
            let rules = worksim_core::metatask::list_rules(Default::default());
            if json {
                emit(&format!("{}\n", serde_json::to_string_pretty(&rules)?))?;
            } else {
                let name = |v: serde_json::Value| v.as_str().unwrap_or_default().to_string();
                for r in rules {
                    let difficulty = name(serde_json::to_value(r.difficulty)?);
                    let domain = name(serde_json::to_value(r.domain)?);
                    emit(&format!(
                        "{:<24} {:<6} {:<20} {}\n",
                        r.rule_id, difficulty, domain, r.title
                    ))?;
                }
            }
        }
        Command::Gen {
            rules,
            n,
            seed,
            k_min,
            k_max,
            out,
        } => {
            let rules = commands::load_rules(rules.as_deref())?;
            let b = commands::generate(&rules, n, k_min, k_max, seed, &out)?;
            println!(
                "{} scenarios -> {}",
                b.scenarios.len(),
                out.join(commands::BENCHMARK_FILE).display()
            );
        }
        Command::Run {
            benchmark,
            agent,
            kind,
            seed,
            parallelism,
            hint_tier,
            out,
        } => {
            let config = match (agent, kind) {
                (Some(path), _) => commands::load_agent(&path)?,
                (None, Some(kind)) => builtin(&kind, seed)?,
                (None, None) => bail!("give --agent <config> or --kind <name>"),
            };
            let b = commands::load_benchmark(&benchmark)?;
            let report = commands::run(&b, &config, parallelism, hint_tier, &out)?;
            emit(&report.render())?;
        }
        Command::Score { episodes, json } => {
            let report = commands::score(&episodes)?;
            if json {
                emit(&format!("{}\n", text(report.to_bytes())))?;
            } else {
                emit(&report.render())?;
            }
        }
        Command::Report { report, json } => {
            let report = commands::load_report(&report)?;
            if json {
                emit(&format!("{}\n", text(report.to_bytes())))?;
            } else {
                emit(&report.render())?;
            }
        }
        Command::Replay {
            benchmark,
            log,
            check,
        } => {
            let b = commands::load_benchmark(&benchmark)?;
            let report = commands::replay_log(&b, &log)?;
            let bytes = report.to_bytes();
            emit(&format!("{}\n", text(bytes.clone())))?;
            if let Some(path) = check {
                if std::fs::read(&path)? != bytes {
                    eprintln!("replayed report differs from {}", path.display());
                    return Ok(false);
                }
            }
        }
        Command::Serve { port, data } => {
            let state = Arc::new(AppState::new(data.clone()));
            if let Some(dir) = &data {
                if dir.is_dir() {
                    let n = state.load_dir(dir)?;
                    eprintln!("loaded {n} scenarios from {}", dir.display());
                }
            }
            tokio::runtime::Runtime::new()?.block_on(server::serve(state, port))?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
