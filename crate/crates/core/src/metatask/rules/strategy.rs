//! Strategic-modeling rules: ad campaign budgeting and team outings.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use super::info::{deadline, submit};
use super::{record, MAX_REJECTIONS};
use crate::error::{GenerationError, InstantiateError};
use crate::metatask::eventplan::{
    event_plan_opt, EventConstraints, EventProblem, Road, Venue, OFFICE,
};
use crate::metatask::knapsack::{best_channels, greedy_by_ratio, Channel};
use crate::metatask::{pools, Builder};
use crate::rng::Stream;
use crate::verifier::checkpoint::{
    Matcher, Oracle, Predicate, SubmissionForm, Tolerance, REAL_TOLERANCE,
};
use crate::world::ToolCall;

const CHANNEL_NAMES: [&str; 10] = [
    "Metro Billboards",
    "Campus Posters",
    "Radio Spot",
    "Bus Wraps",
    "Social Feed Ads",
    "Search Ads",
    "Cinema Preroll",
    "Podcast Reads",
    "Mall Screens",
    "Newspaper Insert",
];

const DISTRICTS: [&str; 6] = ["North", "South", "East", "West", "Central", "Harbor"];

/// Heatmap legend: level name, representative density, upper bound.
pub const DENSITY_LEVELS: [(&str, f64, f64); 4] = [
    ("low", 5.0, 10.0),
    ("medium", 15.0, 20.0),
    ("high", 25.0, 30.0),
    ("very high", 35.0, f64::INFINITY),
];

fn level(density: f64) -> (&'static str, f64) {
    DENSITY_LEVELS
        .iter()
        .find(|(_, _, upper)| density < *upper)
        .map(|(name, rep, _)| (*name, *rep))
        .unwrap_or(("very high", 35.0))
}

/// The density an agent reads off the heatmap.
pub fn coarse_density(density: f64) -> f64 {
    level(density).1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdsChannel {
    pub name: String,
    pub cost: i64,
    pub reach: i64,
    pub district: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdsData {
    pub channels: Vec<AdsChannel>,
    /// Exact densities (thousand users), multiples of 0.25.
    pub densities: BTreeMap<String, f64>,
    pub budget: i64,
}

impl AdsData {
    fn with_density(&self, f: impl Fn(f64) -> f64) -> Vec<Channel> {
        self.channels
            .iter()
            .map(|c| Channel {
                name: c.name.clone(),
                cost: c.cost,
                exposure: c.reach as f64 * f(self.densities[&c.district]),
            })
            .collect()
    }

    pub fn true_channels(&self) -> Vec<Channel> {
        self.with_density(|d| d)
    }

    pub fn coarse_channels(&self) -> Vec<Channel> {
        self.with_density(coarse_density)
    }

    /// Whether the instance separates the four agent strategies.
    pub fn admissible(&self) -> bool {
        let t = self.true_channels();
        let c = self.coarse_channels();
        let value = |subset: &[usize]| subset.iter().map(|&i| t[i].exposure).sum::<f64>();
        let opt_t = best_channels(self.budget, &t).total_exposure;
        let greedy_c = greedy_by_ratio(self.budget, &c);
        let opt_c = best_channels(self.budget, &c);
        greedy_by_ratio(self.budget, &t).total_exposure < opt_t
            && greedy_c.total_exposure < opt_c.total_exposure
            && value(&greedy_c.subset) < opt_t
            && value(&opt_c.subset) < opt_t
            && t.iter().zip(&c).any(|(a, b)| a.exposure != b.exposure)
    }
}

pub fn draw_ads(s: &mut Stream) -> Result<AdsData, GenerationError> {
    for _ in 0..MAX_REJECTIONS {
        let n = s.range_inclusive(6, 8) as usize;
        let densities: BTreeMap<String, f64> = DISTRICTS
            .iter()
            .map(|d| (d.to_string(), 0.25 * s.range_inclusive(8, 160) as f64))
            .collect();
        let channels: Vec<AdsChannel> = s
            .sample_indices(CHANNEL_NAMES.len(), n)
            .into_iter()
            .map(|i| AdsChannel {
                name: CHANNEL_NAMES[i].to_string(),
                cost: 50 * s.range_inclusive(2, 20),
                reach: s.range_inclusive(1, 9),
                district: s.pick(&DISTRICTS).to_string(),
            })
            .collect();
        let total: i64 = channels.iter().map(|c| c.cost).sum();
        let share = 45 + s.range_inclusive(0, 15);
        let budget = (total * share / 100 / 50) * 50;
        let d = AdsData {
            channels,
            densities,
            budget,
        };
        if d.admissible() {
            return Ok(d);
        }
    }
    Err(GenerationError::RejectionLimit(
        "ads_campaign_planning".into(),
    ))
}

/// `73.5`, `80`.
pub fn fmt_real(x: f64) -> String {
    format!("{x}")
}

/// Ads plan in the submission format the task asks for.
pub fn ads_plan_text(channels: &[Channel], reported: &[f64], subset: &[usize]) -> String {
    let names: Vec<&str> = subset.iter().map(|&i| channels[i].name.as_str()).collect();
    let exposures: Vec<String> = channels
        .iter()
        .zip(reported)
        .map(|(c, e)| format!("{}={}", c.name, fmt_real(*e)))
        .collect();
    let cost: i64 = subset.iter().map(|&i| channels[i].cost).sum();
    let total: f64 = subset.iter().map(|&i| reported[i]).sum();
    format!(
        "channels: {}\nexposures: {}\ntotal_cost: {cost}\ntotal_exposure: {}",
        names.join(", "),
        exposures.join("; "),
        fmt_real(total)
    )
}

pub(crate) fn build_ads(b: &mut Builder<'_>, d: &AdsData) -> Result<(), InstantiateError> {
    let city = b.label("city")?.to_string();
    let group = b.label("group")?.to_string();
    let folder = format!("CloudDisk://ads_strategy/{}/", b.var("city.slug")?);
    let density_key = format!("{}_{group}", b.var("city.slug")?);
    let group_words = group.replace('_', " ");
    let density_text = format!(
        "Exact target-user density of {group_words} in {city} (thousand users per district): {}",
        d.densities
            .iter()
            .map(|(k, v)| format!("{k}={}", fmt_real(*v)))
            .collect::<Vec<_>>()
            .join("; ")
    );
    b.set("folder", &folder);
    b.set("budget", d.budget.to_string());
    b.set("group_words", &group_words);
    b.set("density_key", &density_key);
    b.set("density_text", &density_text);
    let handbook = b.clue("handbook")?;
    let handbook_path = b.clue_file(&handbook)?;
    let handbook_text = b.clue_content(&handbook).unwrap_or_default().to_string();
    b.file(&handbook_path, handbook_text);
    b.clue("density")?;
    b.row(
        "ads_density",
        &density_key,
        record([("info", density_text)]),
    );
    let mut csv = String::from("channel,cost_usd,reach,district\n");
    for c in &d.channels {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            c.name, c.cost, c.reach, c.district
        ));
    }
    let csv_path = format!("{folder}channels.csv");
    b.file(&csv_path, csv);
    let mut png = format!(
        "[image] target_user_density_{group}.png\nHeatmap of {group_words} density in {city}, thousand users per district.\nLegend: {}\n",
        DENSITY_LEVELS
            .iter()
            .map(|(n, v, _)| format!("{n} = about {v}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    for (district, v) in &d.densities {
        png.push_str(&format!("{district}: {}\n", level(*v).0));
    }
    b.file(&format!("{folder}target_user_density_{group}.png"), png);
    b.replies()?;

    let truth = d.true_channels();
    let names: Vec<String> = truth.iter().map(|c| c.name.clone()).collect();
    b.checkpoint(
        "handbook",
        Predicate::FileRead {
            path: handbook_path.clone(),
        },
    )?;
    b.checkpoint(
        "exposures",
        Predicate::SubmissionMatches {
            matcher: Matcher::AdsExposures {
                channels: truth.clone(),
            },
        },
    )?;
    b.checkpoint(
        "consistent",
        Predicate::SubmissionMatches {
            matcher: Matcher::AdsSelfOptimal {
                channels: truth.clone(),
                budget: d.budget,
            },
        },
    )?;
    b.checkpoint(
        "optimal",
        Predicate::SubmissionOptimal {
            oracle: Oracle::Knapsack {
                channels: truth.clone(),
                budget: d.budget,
            },
            tolerance: REAL_TOLERANCE,
        },
    )?;
    deadline(b, SubmissionForm::AdsPlan { channels: names })?;
    for key in ["hint_1", "hint_2", "hint_3"] {
        let h = b.text(key)?;
        b.hint(h);
    }

    let manager = b.persona("manager")?.name.clone();
    let ask = b.text("ask")?;
    b.step(
        ToolCall::new("AskNPC")
            .arg("npc", manager)
            .arg("message", ask),
    );
    b.step(ToolCall::new("ReadFile").arg("path", handbook_path));
    b.step(ToolCall::new("ReadFile").arg("path", csv_path));
    b.step(
        ToolCall::new("QueryDatabase")
            .arg("table", "ads_density")
            .arg("key", density_key),
    );
    let exposures: Vec<f64> = truth.iter().map(|c| c.exposure).collect();
    let best = best_channels(d.budget, &truth);
    submit(b, ads_plan_text(&truth, &exposures, &best.subset));
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventVenue {
    pub name: String,
    pub value: i64,
    pub cost: i64,
    pub open_days: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventData {
    pub members: Vec<String>,
    /// Per member, indices into the ten candidate weekdays.
    pub availability: Vec<Vec<usize>>,
    pub venues: Vec<EventVenue>,
    pub roads: Vec<Road>,
    pub constraints: EventConstraints,
}

const WEEKDAYS: [&str; 5] = ["Mon", "Tue", "Wed", "Thu", "Fri"];

/// The ten weekdays of the two weeks starting the Monday after `date`.
pub fn candidate_dates(date: NaiveDate) -> Vec<NaiveDate> {
    let ahead = 7 - date.weekday().num_days_from_monday() as i64;
    let monday = date + Duration::days(ahead);
    (0..14)
        .map(|i| monday + Duration::days(i))
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .collect()
}

impl EventData {
    pub fn problem(&self, date: NaiveDate) -> EventProblem {
        let days = candidate_dates(date);
        EventProblem {
            availability: self
                .members
                .iter()
                .zip(&self.availability)
                .map(|(m, idx)| (m.clone(), idx.iter().map(|&i| days[i]).collect()))
                .collect(),
            venues: self
                .venues
                .iter()
                .map(|v| Venue {
                    name: v.name.clone(),
                    value: v.value,
                    cost: v.cost,
                    open_days: v.open_days.iter().cloned().collect(),
                })
                .collect(),
            roads: self.roads.clone(),
            constraints: self.constraints,
        }
    }
}

pub fn draw_event(s: &mut Stream) -> Result<EventData, GenerationError> {
    let first = pools::first_names();
    let venue_pool = pools::label_pool("venues")?;
    for _ in 0..MAX_REJECTIONS {
        let members: Vec<String> = s
            .sample_indices(first.len(), 3)
            .into_iter()
            .map(|i| first[i].to_string())
            .collect();
        let availability: Vec<Vec<usize>> = members
            .iter()
            .map(|_| (0..10).filter(|_| s.chance(0.6)).collect())
            .collect();
        let venues: Vec<EventVenue> = s
            .sample_indices(venue_pool.len(), 6)
            .into_iter()
            .map(|i| EventVenue {
                name: venue_pool[i].to_string(),
                value: s.range_inclusive(10, 60),
                cost: 10 * s.range_inclusive(2, 12),
                open_days: WEEKDAYS
                    .iter()
                    .filter(|_| s.chance(0.6))
                    .map(|d| d.to_string())
                    .collect(),
            })
            .collect();
        if venues.iter().any(|v| v.open_days.len() < 2) {
            continue;
        }
        let mut nodes: Vec<String> = vec![OFFICE.to_string()];
        nodes.extend(venues.iter().map(|v| v.name.clone()));
        let mut edges = BTreeSet::new();
        let mut roads = Vec::new();
        for i in 1..nodes.len() {
            let j = s.below(i as u64) as usize;
            edges.insert((j, i));
            roads.push(Road {
                from: nodes[j].clone(),
                to: nodes[i].clone(),
                km: s.range_inclusive(1, 15),
            });
        }
        while roads.len() < nodes.len() - 1 + 4 {
            let mut pair = s.sample_indices(nodes.len(), 2);
            pair.sort_unstable();
            if edges.insert((pair[0], pair[1])) {
                roads.push(Road {
                    from: nodes[pair[0]].clone(),
                    to: nodes[pair[1]].clone(),
                    km: s.range_inclusive(1, 15),
                });
            }
        }
        let d = EventData {
            members,
            availability,
            venues,
            roads,
            constraints: EventConstraints {
                stops: 3,
                budget: 10 * s.range_inclusive(12, 30),
                penalty: s.range_inclusive(1, 3),
            },
        };
        let p = d.problem(crate::time::base_date());
        if p.common_dates().len() >= 2 && event_plan_opt(&p).is_ok() {
            return Ok(d);
        }
    }
    Err(GenerationError::RejectionLimit("event_planning".into()))
}

pub fn event_plan_text(date: NaiveDate, itinerary: &[String], score: i64) -> String {
    format!(
        "date: {date}\nitinerary: {}\nscore: {score}",
        itinerary.join(", ")
    )
}

pub(crate) fn build_event(b: &mut Builder<'_>, d: &EventData) -> Result<(), InstantiateError> {
    let team = b.label("team")?.to_string();
    let folder = format!("CloudDisk://events/{}/", b.var("team.slug")?);
    let problem = d.problem(b.date());
    let c = d.constraints;
    let mut availability_text = format!("Availability of the {team} team over the next two weeks:");
    for (m, dates) in &problem.availability {
        let list: Vec<String> = dates.iter().map(|x| x.to_string()).collect();
        availability_text.push_str(&format!("\n- {m}: {}", list.join(", ")));
    }
    let constraints_text = format!(
        "# Outing constraints\n\n- Visit exactly {} venues.\n- The total ticket cost must not exceed {} USD.\n- Every venue must be open on the day of the outing.\n- Score = total venue value - {} x route length in km. The route starts at the Office, visits the venues in order and returns to the Office along the shortest roads of map.csv.\n",
        c.stops, c.budget, c.penalty
    );
    b.set("folder", &folder);
    b.set("stops", c.stops.to_string());
    b.set("budget", c.budget.to_string());
    b.set("penalty", c.penalty.to_string());
    b.set("availability_text", &availability_text);
    b.set("constraints_text", &constraints_text);
    let availability = b.clue("availability")?;
    let constraints = b.clue("constraints")?;
    let constraints_path = b.clue_file(&constraints)?;
    b.row(
        "team_availability",
        &team,
        record([("info", availability_text)]),
    );
    b.file(&constraints_path, constraints_text);
    let mut venues_csv = String::from("venue,value,cost_usd,open_days\n");
    for v in &d.venues {
        venues_csv.push_str(&format!(
            "{},{},{},{}\n",
            v.name,
            v.value,
            v.cost,
            v.open_days.join("|")
        ));
    }
    let venues_path = format!("{folder}venues.csv");
    b.file(&venues_path, venues_csv);
    let mut map_csv = String::from("from,to,km\n");
    for r in &d.roads {
        map_csv.push_str(&format!("{},{},{}\n", r.from, r.to, r.km));
    }
    let map_path = format!("{folder}map.csv");
    b.file(&map_path, map_csv);

    b.checkpoint(
        "availability",
        Predicate::ClueRevealed { clue: availability },
    )?;
    for (key, matcher) in [
        (
            "date",
            Matcher::EventDate {
                problem: problem.clone(),
            },
        ),
        (
            "feasible",
            Matcher::EventFeasible {
                problem: problem.clone(),
            },
        ),
        (
            "score",
            Matcher::EventScore {
                problem: problem.clone(),
            },
        ),
    ] {
        b.checkpoint(key, Predicate::SubmissionMatches { matcher })?;
    }
    b.checkpoint(
        "optimal",
        Predicate::SubmissionOptimal {
            oracle: Oracle::EventPlan {
                problem: problem.clone(),
            },
            tolerance: Tolerance::Exact,
        },
    )?;
    deadline(
        b,
        SubmissionForm::EventPlan {
            venues: d.venues.iter().map(|v| v.name.clone()).collect(),
        },
    )?;

    let plan =
        event_plan_opt(&problem).map_err(|e| InstantiateError::MissingValue(e.to_string()))?;
    b.step(
        ToolCall::new("QueryDatabase")
            .arg("table", "team_availability")
            .arg("key", team),
    );
    b.step(ToolCall::new("ReadFile").arg("path", constraints_path));
    b.step(ToolCall::new("ReadFile").arg("path", venues_path));
    b.step(ToolCall::new("ReadFile").arg("path", map_path));
    submit(b, event_plan_text(plan.date, &plan.itinerary, plan.score));
    Ok(())
}
