//! Simulated clock values with minute resolution.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime, Timelike, Weekday};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

const FORMAT: &str = "%Y-%m-%dT%H:%M";

/// A point on the simulated timeline. Seconds are always zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(NaiveDateTime);

impl SimTime {
    pub fn at(date: NaiveDate, hour: u32, minute: u32) -> Self {
        let t = NaiveTime::from_hms_opt(hour, minute, 0).expect("valid time of day");
        SimTime(date.and_time(t))
    }

    pub fn date(&self) -> NaiveDate {
        self.0.date()
    }

    pub fn weekday(&self) -> Weekday {
        self.0.weekday()
    }

    /// Minutes since midnight.
    pub fn minute_of_day(&self) -> u32 {
        self.0.hour() * 60 + self.0.minute()
    }

    pub fn plus_minutes(&self, minutes: i64) -> Self {
        SimTime(self.0 + Duration::minutes(minutes))
    }

    pub fn minutes_until(&self, later: SimTime) -> i64 {
        (later.0 - self.0).num_minutes()
    }

    /// `HH:MM`.
    pub fn hhmm(&self) -> String {
        self.0.format("%H:%M").to_string()
    }

    /// Human-readable form used in tool output, e.g. `2025-10-01 09:00:00`.
    pub fn display_long(&self) -> String {
        self.0.format("%Y-%m-%d %H:%M:%S").to_string()
    }

    /// Parses either a full timestamp or a bare `HH:MM` relative to `today`.
    pub fn parse_relative(text: &str, today: NaiveDate) -> Option<SimTime> {
        let text = text.trim();
        if let Ok(t) = text.parse::<SimTime>() {
            return Some(t);
        }
        for f in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M", "%Y-%m-%dT%H:%M:%S"] {
            if let Ok(dt) = NaiveDateTime::parse_from_str(text, f) {
                return Some(SimTime(dt.with_second(0).unwrap_or(dt)));
            }
        }
        for f in ["%H:%M", "%H:%M:%S"] {
            if let Ok(t) = NaiveTime::parse_from_str(text, f) {
                return Some(SimTime(today.and_time(t.with_second(0).unwrap_or(t))));
            }
        }
        None
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format(FORMAT))
    }
}

impl FromStr for SimTime {
    type Err = chrono::ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NaiveDateTime::parse_from_str(s, FORMAT).map(SimTime)
    }
}

impl Serialize for SimTime {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SimTime {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(|e| {
            serde::de::Error::custom(format!(
                "invalid timestamp {s:?} (expected YYYY-MM-DDTHH:MM): {e}"
            ))
        })
    }
}

/// Half-open interval `[start, end)` on the simulated clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub start: SimTime,
    pub end: SimTime,
}

impl Interval {
    pub fn new(start: SimTime, end: SimTime) -> Self {
        Self { start, end }
    }

    pub fn minutes(&self) -> i64 {
        self.start.minutes_until(self.end)
    }

    pub fn contains(&self, t: SimTime) -> bool {
        self.start <= t && t < self.end
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn within(&self, outer: &Interval) -> bool {
        outer.start <= self.start && self.end <= outer.end
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start.hhmm(), self.end.hhmm())
    }
}

/// The simulated date the first scenario day runs on.
pub fn base_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2025, 10, 1).expect("valid date")
}

/// 09:00-18:00 on `date`.
pub fn standard_workday(date: NaiveDate) -> Interval {
    Interval::new(SimTime::at(date, 9, 0), SimTime::at(date, 18, 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_text() {
        let t = SimTime::at(base_date(), 13, 5);
        assert_eq!(t.to_string(), "2025-10-01T13:05");
        assert_eq!("2025-10-01T13:05".parse::<SimTime>().unwrap(), t);
        assert_eq!(t.display_long(), "2025-10-01 13:05:00");
    }

    #[test]
    fn parses_relative_forms() {
        let d = base_date();
        let want = SimTime::at(d, 14, 30);
        assert_eq!(SimTime::parse_relative("14:30", d), Some(want));
        assert_eq!(
            SimTime::parse_relative("2025-10-01 14:30:00", d),
            Some(want)
        );
        assert_eq!(
            SimTime::parse_relative("2025-10-01T14:30:00", d),
            Some(want)
        );
        assert_eq!(SimTime::parse_relative("half past two", d), None);
    }

    #[test]
    fn interval_overlap_is_half_open() {
        let d = base_date();
        let a = Interval::new(SimTime::at(d, 13, 0), SimTime::at(d, 14, 0));
        let b = Interval::new(SimTime::at(d, 14, 0), SimTime::at(d, 15, 0));
        assert!(!a.overlaps(&b));
        assert!(a.contains(SimTime::at(d, 13, 59)));
        assert!(!a.contains(SimTime::at(d, 14, 0)));
        assert_eq!(a.minutes(), 60);
    }
}
