//! Conversation history with digest-based compression.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const DEFAULT_THRESHOLD_TOKENS: usize = 24_000;
pub const MAX_FACTS: usize = 12;
const FACT_CHARS: usize = 200;
const RECENT: usize = 3;
const RECENT_CHARS: usize = 300;
const INFO_TOOLS: [&str; 5] = [
    "ReadFile",
    "QueryDatabase",
    "AskNPC",
    "BrowseWebsite",
    "CheckCalendar",
];

/// Characters over four, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultLine {
    pub tool: String,
    pub ok: bool,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Digest {
    /// Task id -> `open` or `submitted`.
    pub tasks: BTreeMap<String, String>,
    pub facts: Vec<String>,
    pub recent: Vec<String>,
    pub folded: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HistoryEntry {
    Exchange {
        response: String,
        results: Vec<ResultLine>,
        observation: String,
    },
    Digest(Digest),
}

fn clip(text: &str, n: usize) -> String {
    let mut out: String = text.chars().take(n).collect();
    if text.chars().count() > n {
        out.push_str("...");
    }
    out
}

fn task_ids(text: &str) -> Vec<String> {
    text.match_indices("[T")
        .filter_map(|(i, _)| {
            let rest = &text[i + 1..];
            let end = rest.find(']')?;
            let id = &rest[..end];
            (id.len() > 1 && id[1..].chars().all(|c| c.is_ascii_digit())).then(|| id.to_string())
        })
        .collect()
}

impl HistoryEntry {
    pub fn render(&self) -> String {
        match self {
            HistoryEntry::Exchange {
                response,
                observation,
                ..
            } => format!("{response}\n{observation}"),
            HistoryEntry::Digest(d) => d.render(),
        }
    }

    pub fn tokens(&self) -> usize {
        estimate_tokens(&self.render())
    }
}

impl Digest {
    pub fn render(&self) -> String {
        let mut out = format!("Summary of {} earlier exchanges.\nTasks:\n", self.folded);
        for (t, s) in &self.tasks {
            out.push_str(&format!("- {t}: {s}\n"));
        }
        out.push_str("Facts:\n");
        for f in &self.facts {
            out.push_str(&format!("- {f}\n"));
        }
        out.push_str("Recent results:\n");
        for r in &self.recent {
            out.push_str(&format!("- {r}\n"));
        }
        out
    }

    /// Folds entries, oldest first, into one digest.
    pub fn fold(entries: &[HistoryEntry]) -> Digest {
        let mut d = Digest::default();
        let mut recent: Vec<String> = Vec::new();
        for e in entries {
            match e {
                HistoryEntry::Digest(inner) => {
                    d.tasks.extend(inner.tasks.clone());
                    d.facts.extend(inner.facts.iter().cloned());
                    recent.extend(inner.recent.iter().cloned());
                    d.folded += inner.folded;
                }
                HistoryEntry::Exchange {
                    results,
                    observation,
                    ..
                } => {
                    d.folded += 1;
                    for id in task_ids(observation) {
                        d.tasks.entry(id).or_insert_with(|| "open".to_string());
                    }
                    for r in results {
                        if r.tool == "SubmitResult" && r.ok {
                            for id in r.text.split_whitespace().filter(|w| w.starts_with('T')) {
                                let id = id.trim_end_matches(|c: char| !c.is_ascii_alphanumeric());
                                if id[1..].chars().all(|c| c.is_ascii_digit()) && id.len() > 1 {
                                    d.tasks.insert(id.to_string(), "submitted".to_string());
                                }
                            }
                        }
                        if r.ok && INFO_TOOLS.contains(&r.tool.as_str()) {
                            d.facts
                                .push(clip(&format!("{}: {}", r.tool, r.text), FACT_CHARS));
                        }
                        recent.push(clip(&format!("{}: {}", r.tool, r.text), RECENT_CHARS));
                    }
                }
            }
        }
        let skip = d.facts.len().saturating_sub(MAX_FACTS);
        d.facts.drain(..skip);
        let skip = recent.len().saturating_sub(RECENT);
        d.recent = recent.split_off(skip);
        d
    }
}

pub fn total_tokens(history: &[HistoryEntry]) -> usize {
    history.iter().map(HistoryEntry::tokens).sum()
}

/// Appends `new`; above `threshold` tokens the oldest half becomes one digest.
pub fn maintain_history(
    mut history: Vec<HistoryEntry>,
    new: HistoryEntry,
    threshold: usize,
) -> Vec<HistoryEntry> {
    history.push(new);
    if total_tokens(&history) <= threshold || history.len() < 2 {
        return history;
    }
    let half = history.len() / 2;
    let digest = Digest::fold(&history[..half]);
    let mut out = Vec::with_capacity(history.len() - half + 1);
    out.push(HistoryEntry::Digest(digest));
    out.extend(history.drain(half..));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exchange(i: usize) -> HistoryEntry {
        HistoryEntry::Exchange {
            response: format!("step {i}"),
            results: vec![ResultLine {
                tool: "ReadFile".into(),
                ok: true,
                text: "x".repeat(40 + i % 50),
            }],
            observation: format!("[10:{:02}] ok\n- [T{}] task", i % 60, i % 4 + 1),
        }
    }

    #[test]
    fn below_threshold_is_untouched() {
        let h = maintain_history(vec![exchange(0)], exchange(1), 10_000);
        assert_eq!(h, vec![exchange(0), exchange(1)]);
    }

    #[test]
    fn just_above_threshold_folds_oldest_half() {
        let mut h = Vec::new();
        for i in 0..4 {
            h.push(exchange(i));
        }
        let limit = total_tokens(&h) + exchange(4).tokens() - 1;
        let out = maintain_history(h, exchange(4), limit);
        assert_eq!(out.len(), 4);
        assert!(matches!(&out[0], HistoryEntry::Digest(d) if d.folded == 2));
        assert_eq!(&out[1..], &[exchange(2), exchange(3), exchange(4)]);
    }
}
