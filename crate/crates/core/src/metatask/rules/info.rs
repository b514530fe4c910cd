//! Information-synthesis rules: auditing, data completion, reporting.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, Months, NaiveDate};
use serde::{Deserialize, Serialize};

use super::{join_words, record};
use crate::error::InstantiateError;
use crate::metatask::Builder;
use crate::rng::Stream;
use crate::verifier::checkpoint::{Matcher, Predicate, SubmissionForm};
use crate::world::ToolCall;

const CATEGORIES: [&str; 8] = [
    "Office supplies",
    "Travel",
    "Catering",
    "Software licences",
    "Hardware",
    "Consulting",
    "Training",
    "Courier",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tx {
    pub id: String,
    pub amount: i64,
    pub category: String,
    /// Day of last month.
    pub day: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionData {
    pub threshold: i64,
    pub rows: Vec<Tx>,
}

impl TransactionData {
    pub fn flagged(&self) -> BTreeSet<String> {
        self.rows
            .iter()
            .filter(|t| t.amount > self.threshold)
            .map(|t| t.id.clone())
            .collect()
    }
}

pub fn draw_transactions(s: &mut Stream) -> TransactionData {
    let threshold = 1000 + 250 * s.range_inclusive(0, 16);
    let n = 8;
    let above = s.range_inclusive(2, 3) as usize;
    let mut ids = BTreeSet::new();
    while ids.len() < n {
        ids.insert(s.range_inclusive(1000, 9999));
    }
    let mut ids: Vec<i64> = ids.into_iter().collect();
    s.shuffle(&mut ids);
    let rows = ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| {
            let amount = if i < above {
                s.range_inclusive(threshold + 1, threshold * 9 / 5)
            } else {
                s.range_inclusive(threshold / 5, threshold - 1)
            };
            Tx {
                id: format!("TX-{id}"),
                amount,
                category: s.pick(&CATEGORIES).to_string(),
                day: s.range_inclusive(1, 28) as u32,
            }
        })
        .collect::<Vec<_>>();
    let mut rows = rows;
    rows.sort_by(|a, b| a.id.cmp(&b.id));
    TransactionData { threshold, rows }
}

fn last_month(date: NaiveDate, day: u32) -> NaiveDate {
    let m = date - Months::new(1);
    NaiveDate::from_ymd_opt(m.year(), m.month(), day).unwrap_or(m)
}

pub(crate) fn build_transactions(
    b: &mut Builder<'_>,
    d: &TransactionData,
) -> Result<(), InstantiateError> {
    let dept = b.label("dept")?.to_string();
    let table = format!("transactions_{}", b.var("dept.slug")?);
    b.set("table", &table);
    b.set("threshold", d.threshold.to_string());
    let policy = b.clue("policy")?;
    let text = b.clue_content(&policy).unwrap_or_default().to_string();
    b.row("audit_policy", &dept, record([("policy", text)]));
    for t in &d.rows {
        let date = last_month(b.date(), t.day);
        b.row(
            &table,
            &t.id,
            record([
                ("amount_usd", t.amount.to_string()),
                ("category", t.category.clone()),
                ("date", date.to_string()),
            ]),
        );
    }
    let flagged = d.flagged();
    b.checkpoint("policy", Predicate::ClueRevealed { clue: policy })?;
    b.checkpoint(
        "flagged",
        Predicate::SubmissionMatches {
            matcher: Matcher::FlaggedIds {
                expected: flagged.clone(),
            },
        },
    )?;
    deadline(b, SubmissionForm::Flagged)?;
    let answer = format!(
        "flagged: {}",
        flagged.into_iter().collect::<Vec<_>>().join(", ")
    );
    b.step(
        ToolCall::new("QueryDatabase")
            .arg("table", "audit_policy")
            .arg("key", dept),
    );
    b.step(ToolCall::new("QueryDatabase").arg("table", table));
    submit(b, answer);
    Ok(())
}

pub(crate) fn deadline(b: &mut Builder<'_>, form: SubmissionForm) -> Result<(), InstantiateError> {
    let at = b
        .deadline_time()
        .ok_or_else(|| InstantiateError::MissingValue("deadline".into()))?;
    b.checkpoint("deadline", Predicate::DeadlineMet { deadline: at, form })
}

pub(crate) fn submit(b: &mut Builder<'_>, content: String) {
    let task = b.task_id().to_string();
    b.step(
        ToolCall::new("SubmitResult")
            .arg("task_id", task)
            .arg("content", content),
    );
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SalesData {
    /// Six monthly values, January to June; missing months hold their
    /// completed value.
    pub values: Vec<i64>,
    pub missing: Vec<usize>,
}

impl SalesData {
    /// Completion by the manual: interior gaps average their neighbours,
    /// edge gaps copy their single neighbour.
    pub fn completed(&self) -> BTreeMap<usize, i64> {
        self.missing
            .iter()
            .map(|&i| {
                let v = match i {
                    0 => self.values[1],
                    i if i + 1 == self.values.len() => self.values[i - 1],
                    i => (self.values[i - 1] + self.values[i + 1]) / 2,
                };
                (i, v)
            })
            .collect()
    }
}

pub fn draw_sales(s: &mut Stream) -> SalesData {
    let mut values: Vec<i64> = (0..6).map(|_| 2 * s.range_inclusive(400, 4000)).collect();
    let missing = loop {
        let mut m = s.sample_indices(6, 2);
        m.sort_unstable();
        if m[1] - m[0] > 1 {
            break m;
        }
    };
    let completed = SalesData {
        values: values.clone(),
        missing: missing.clone(),
    }
    .completed();
    for (i, v) in completed {
        values[i] = v;
    }
    SalesData { values, missing }
}

fn month_key(year: i32, index: usize) -> String {
    format!("{year}-{:02}", index + 1)
}

pub(crate) fn build_sales(b: &mut Builder<'_>, d: &SalesData) -> Result<(), InstantiateError> {
    let table = format!("sales_{}", b.var("dept.slug")?);
    b.set("table", &table);
    let year = b.date().year() - 1;
    let manual = b.clue("manual")?;
    let path = b.clue_file(&manual)?;
    let text = b.clue_content(&manual).unwrap_or_default().to_string();
    b.file(&path, text);
    for (i, v) in d.values.iter().enumerate() {
        let shown = if d.missing.contains(&i) {
            "missing".to_string()
        } else {
            v.to_string()
        };
        b.row(&table, &month_key(year, i), record([("sales_usd", shown)]));
    }
    b.replies()?;
    let expected: BTreeMap<String, i64> = d
        .completed()
        .into_iter()
        .map(|(i, v)| (month_key(year, i), v))
        .collect();
    b.checkpoint("manual", Predicate::FileRead { path: path.clone() })?;
    b.checkpoint(
        "values",
        Predicate::SubmissionMatches {
            matcher: Matcher::KeyValues {
                expected: expected.clone(),
            },
        },
    )?;
    deadline(b, SubmissionForm::KeyValues)?;
    let manager = b.persona("manager")?.name.clone();
    let ask = b.text("ask")?;
    b.step(
        ToolCall::new("AskNPC")
            .arg("npc", manager)
            .arg("message", ask),
    );
    b.step(ToolCall::new("ReadFile").arg("path", path));
    b.step(ToolCall::new("QueryDatabase").arg("table", table));
    let answer = expected
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join("\n");
    submit(b, answer);
    Ok(())
}

pub const METRICS: [&str; 8] = [
    "budget_spent",
    "open_issues",
    "closed_issues",
    "milestones_done",
    "test_coverage",
    "defect_count",
    "velocity",
    "risk_items",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsData {
    pub values: BTreeMap<String, i64>,
    /// Requested metrics, in the order the lead lists them.
    pub requested: Vec<String>,
}

pub fn draw_metrics(s: &mut Stream) -> MetricsData {
    let ranges: [(i64, i64); 8] = [
        (10_000, 90_000),
        (3, 60),
        (10, 200),
        (1, 12),
        (40, 98),
        (0, 40),
        (8, 60),
        (0, 9),
    ];
    let values = METRICS
        .iter()
        .zip(ranges)
        .map(|(m, (lo, hi))| (m.to_string(), s.range_inclusive(lo, hi)))
        .collect();
    let mut idx = s.sample_indices(METRICS.len(), 3);
    idx.sort_unstable();
    MetricsData {
        values,
        requested: idx.into_iter().map(|i| METRICS[i].to_string()).collect(),
    }
}

pub(crate) fn build_metrics(b: &mut Builder<'_>, d: &MetricsData) -> Result<(), InstantiateError> {
    let project = b.label("project")?.to_string();
    b.set("metric_list", join_words(&d.requested));
    let clue = b.clue("metrics")?;
    b.replies()?;
    b.row(
        "project_metrics",
        &project,
        d.values
            .iter()
            .map(|(k, v)| (k.clone(), v.to_string()))
            .collect(),
    );
    let expected: BTreeMap<String, String> = d
        .requested
        .iter()
        .map(|m| (m.clone(), d.values[m].to_string()))
        .collect();
    b.checkpoint("metrics", Predicate::ClueRevealed { clue })?;
    b.checkpoint(
        "content",
        Predicate::SubmissionMatches {
            matcher: Matcher::Fields {
                expected: expected.clone(),
            },
        },
    )?;
    deadline(
        b,
        SubmissionForm::Fields {
            names: d.requested.clone(),
        },
    )?;
    let lead = b.persona("lead")?.name.clone();
    let ask = b.text("ask")?;
    b.step(ToolCall::new("AskNPC").arg("npc", lead).arg("message", ask));
    b.step(
        ToolCall::new("QueryDatabase")
            .arg("table", "project_metrics")
            .arg("key", project),
    );
    let answer = d
        .requested
        .iter()
        .map(|m| format!("{m}: {}", expected[m]))
        .collect::<Vec<_>>()
        .join("\n");
    submit(b, answer);
    Ok(())
}
