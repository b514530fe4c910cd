//! Team-outing planner: common date plus venue itinerary.
//!
//! Score of a plan = sum of venue values - `penalty` x route length in km,
//! where the route runs Office -> v1 -> ... -> vm -> Office along shortest
//! paths of the road map.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::PlanError;

pub const OFFICE: &str = "Office";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Venue {
    pub name: String,
    pub value: i64,
    pub cost: i64,
    /// Three-letter weekday names, e.g. `Mon`.
    pub open_days: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Road {
    pub from: String,
    pub to: String,
    pub km: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventConstraints {
    pub stops: usize,
    pub budget: i64,
    pub penalty: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventProblem {
    /// Member -> dates they are available.
    pub availability: BTreeMap<String, BTreeSet<NaiveDate>>,
    pub venues: Vec<Venue>,
    pub roads: Vec<Road>,
    pub constraints: EventConstraints,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventPlan {
    pub date: NaiveDate,
    pub itinerary: Vec<String>,
    pub score: i64,
}

pub fn weekday_name(day: Weekday) -> &'static str {
    match day {
        Weekday::Mon => "Mon",
        Weekday::Tue => "Tue",
        Weekday::Wed => "Wed",
        Weekday::Thu => "Thu",
        Weekday::Fri => "Fri",
        Weekday::Sat => "Sat",
        Weekday::Sun => "Sun",
    }
}

impl EventProblem {
    /// Dates on which every member is available, ascending.
    pub fn common_dates(&self) -> Vec<NaiveDate> {
        let mut sets = self.availability.values();
        let Some(first) = sets.next() else {
            return Vec::new();
        };
        let mut common = first.clone();
        for s in sets {
            common = common.intersection(s).copied().collect();
        }
        common.into_iter().collect()
    }

    pub fn venue(&self, name: &str) -> Option<&Venue> {
        self.venues
            .iter()
            .find(|v| v.name.eq_ignore_ascii_case(name.trim()))
    }

    /// Shortest-path distances between Office and every venue.
    pub fn distances(&self) -> BTreeMap<(String, String), i64> {
        let mut nodes: Vec<String> = vec![OFFICE.to_string()];
        nodes.extend(self.venues.iter().map(|v| v.name.clone()));
        let index: BTreeMap<&str, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let mut adj = vec![Vec::new(); nodes.len()];
        for r in &self.roads {
            if let (Some(&a), Some(&b)) = (index.get(r.from.as_str()), index.get(r.to.as_str())) {
                adj[a].push((b, r.km));
                adj[b].push((a, r.km));
            }
        }
        let mut out = BTreeMap::new();
        for (s, src) in nodes.iter().enumerate() {
            let mut dist = vec![i64::MAX; nodes.len()];
            dist[s] = 0;
            let mut heap = BinaryHeap::from([Reverse((0i64, s))]);
            while let Some(Reverse((d, u))) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                for &(v, w) in &adj[u] {
                    let nd = d + w;
                    if nd < dist[v] {
                        dist[v] = nd;
                        heap.push(Reverse((nd, v)));
                    }
                }
            }
            for (t, dst) in nodes.iter().enumerate() {
                if dist[t] != i64::MAX {
                    out.insert((src.clone(), dst.clone()), dist[t]);
                }
            }
        }
        out
    }

    /// Route length of an itinerary, `None` if some leg is unreachable or a
    /// venue is unknown.
    pub fn route_km(
        &self,
        itinerary: &[String],
        dist: &BTreeMap<(String, String), i64>,
    ) -> Option<i64> {
        let mut total = 0;
        let mut here = OFFICE.to_string();
        for name in itinerary
            .iter()
            .map(String::as_str)
            .chain(std::iter::once(OFFICE))
        {
            let canon = if name == OFFICE {
                OFFICE.to_string()
            } else {
                self.venue(name)?.name.clone()
            };
            total += dist.get(&(here.clone(), canon.clone()))?;
            here = canon;
        }
        Some(total)
    }

    /// Score of an itinerary regardless of constraints.
    pub fn score(&self, itinerary: &[String]) -> Option<i64> {
        let dist = self.distances();
        let km = self.route_km(itinerary, &dist)?;
        let value: i64 = itinerary
            .iter()
            .map(|n| self.venue(n).map(|v| v.value))
            .sum::<Option<i64>>()?;
        Some(value - self.constraints.penalty * km)
    }

    /// Itinerary rules: exact stop count, distinct known venues, budget, open
    /// on the date's weekday, reachable route.
    pub fn itinerary_feasible(&self, date: NaiveDate, itinerary: &[String]) -> bool {
        if itinerary.len() != self.constraints.stops {
            return false;
        }
        let day = weekday_name(date.weekday());
        let mut seen = BTreeSet::new();
        let mut cost = 0;
        for name in itinerary {
            let Some(v) = self.venue(name) else {
                return false;
            };
            if !seen.insert(v.name.clone()) || !v.open_days.contains(day) {
                return false;
            }
            cost += v.cost;
        }
        cost <= self.constraints.budget && self.route_km(itinerary, &self.distances()).is_some()
    }
}

/// Best plan over every common date and every feasible itinerary. Ties go
/// to the earliest date, then the lexicographically smallest itinerary
/// (venue names compared in order).
pub fn event_plan_opt(problem: &EventProblem) -> Result<EventPlan, PlanError> {
    let dates = problem.common_dates();
    if dates.is_empty() {
        return Err(PlanError::NoFeasiblePlan(
            "no date on which every member is available".into(),
        ));
    }
    let dist = problem.distances();
    let mut venues: Vec<&Venue> = problem.venues.iter().collect();
    venues.sort_by(|a, b| a.name.cmp(&b.name));
    let m = problem.constraints.stops;
    let mut best: Option<EventPlan> = None;
    for date in dates {
        let day = weekday_name(date.weekday());
        let open: Vec<&Venue> = venues
            .iter()
            .copied()
            .filter(|v| v.open_days.contains(day))
            .collect();
        let mut used = vec![false; open.len()];
        let mut path: Vec<usize> = Vec::new();
        search(
            problem, &dist, &open, m, date, &mut used, &mut path, 0, &mut best,
        );
    }
    best.ok_or_else(|| PlanError::NoFeasiblePlan("no itinerary satisfies the constraints".into()))
}

#[allow(clippy::too_many_arguments)]
fn search(
    problem: &EventProblem,
    dist: &BTreeMap<(String, String), i64>,
    open: &[&Venue],
    m: usize,
    date: NaiveDate,
    used: &mut [bool],
    path: &mut Vec<usize>,
    cost: i64,
    best: &mut Option<EventPlan>,
) {
    if path.len() == m {
        let itinerary: Vec<String> = path.iter().map(|&i| open[i].name.clone()).collect();
        let Some(km) = problem.route_km(&itinerary, dist) else {
            return;
        };
        let value: i64 = path.iter().map(|&i| open[i].value).sum();
        let score = value - problem.constraints.penalty * km;
        if best.as_ref().is_none_or(|b| score > b.score) {
            *best = Some(EventPlan {
                date,
                itinerary,
                score,
            });
        }
        return;
    }
    for i in 0..open.len() {
        if used[i] || cost + open[i].cost > problem.constraints.budget {
            continue;
        }
        used[i] = true;
        path.push(i);
        search(
            problem,
            dist,
            open,
            m,
            date,
            used,
            path,
            cost + open[i].cost,
            best,
        );
        path.pop();
        used[i] = false;
    }
}
