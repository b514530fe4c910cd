//! Time-management rules: meetings, calendar coordination, inbox triage.

use serde::{Deserialize, Serialize};

use super::info::{deadline, submit};
use super::{record, MAX_REJECTIONS};
use crate::error::{GenerationError, InstantiateError};
use crate::metatask::{pools, Builder, Reveal};
use crate::rng::Stream;
use crate::time::{Interval, SimTime};
use crate::tools::CALENDAR_TABLE;
use crate::verifier::checkpoint::{Matcher, Predicate, SubmissionForm};
use crate::world::{Meeting, Message, Priority, ToolCall};

fn clock(date: chrono::NaiveDate, minute: u32) -> SimTime {
    SimTime::at(date, minute / 60, minute % 60)
}

fn hhmm(minute: u32) -> String {
    format!("{:02}:{:02}", minute / 60, minute % 60)
}

pub(crate) fn build_meeting(b: &mut Builder<'_>) -> Result<(), InstantiateError> {
    let (start_min, duration) = b
        .draw
        .schedule
        .window
        .ok_or_else(|| InstantiateError::MissingValue("meeting window".into()))?;
    let date = b.date();
    let interval = Interval::new(clock(date, start_min), clock(date, start_min + duration));
    let meeting_id = format!("MTG-{}", b.task_id());
    b.set("meeting_id", &meeting_id);
    b.set("start", interval.start.hhmm());
    b.set("end", interval.end.hhmm());
    b.set("duration", duration.to_string());
    b.deadline(Some(interval.end));
    b.priority(Priority::TimeCritical);
    let organizer = b.persona("organizer")?;
    let title = b.text("title")?;
    let room = b.label("room")?.to_string();
    let task_id = b.task_id().to_string();
    b.meeting(Meeting {
        meeting_id: meeting_id.clone(),
        title,
        organizer: Some(organizer.id.clone()),
        participants: vec![organizer.name.clone(), pools::AGENT_NAME.to_string()],
        room,
        interval,
        task_id: Some(task_id),
        attendance: Vec::new(),
    });
    let min_minutes = (duration as i64 * 4 + 4) / 5;
    b.checkpoint(
        "attended",
        Predicate::MeetingAttended {
            meeting_id: meeting_id.clone(),
            min_minutes,
        },
    )?;
    b.window(interval);
    b.step(ToolCall::new("WaitUntil").arg("time", interval.start.hhmm()));
    b.step(ToolCall::new("AttendMeeting").arg("meeting_id", meeting_id));
    b.step(ToolCall::new("WaitUntil").arg("time", interval.end.hhmm()));
    Ok(())
}

const DAY_START: u32 = 9 * 60;
const DAY_END: u32 = 18 * 60;
const CELLS: usize = ((DAY_END - DAY_START) / 30) as usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalendarData {
    pub duration: u32,
    /// Busy half-hour cells from 09:00, one flag per cell.
    pub first: Vec<bool>,
    pub second: Vec<bool>,
}

/// Earliest start (minute of day) of `cells` consecutive free cells.
fn earliest_free(busy: &[bool], cells: usize) -> Option<u32> {
    (0..=CELLS.saturating_sub(cells))
        .find(|&i| busy[i..i + cells].iter().all(|b| !b))
        .map(|i| DAY_START + 30 * i as u32)
}

impl CalendarData {
    fn cells(&self) -> usize {
        (self.duration / 30) as usize
    }

    /// Earliest slot in which both people are free, as `(start, end)`.
    pub fn earliest_common(&self) -> Option<(u32, u32)> {
        let both: Vec<bool> = self
            .first
            .iter()
            .zip(&self.second)
            .map(|(a, b)| *a || *b)
            .collect();
        earliest_free(&both, self.cells()).map(|s| (s, s + self.duration))
    }

    fn admissible(&self) -> bool {
        let Some((common, _)) = self.earliest_common() else {
            return false;
        };
        let f = earliest_free(&self.first, self.cells());
        let s = earliest_free(&self.second, self.cells());
        self.first[0]
            && self.second[0]
            && f.is_some_and(|x| x < common)
            && s.is_some_and(|x| x < common)
    }
}

/// `09:00-10:30, 13:00-14:00`.
pub fn busy_text(busy: &[bool]) -> String {
    let mut spans = Vec::new();
    let mut i = 0;
    while i < busy.len() {
        if busy[i] {
            let j = (i..busy.len()).find(|&j| !busy[j]).unwrap_or(busy.len());
            spans.push(format!(
                "{}-{}",
                hhmm(DAY_START + 30 * i as u32),
                hhmm(DAY_START + 30 * j as u32)
            ));
            i = j;
        } else {
            i += 1;
        }
    }
    spans.join(", ")
}

fn draw_busy(s: &mut Stream) -> Vec<bool> {
    let mut busy = vec![false; CELLS];
    let blocks = s.range_inclusive(2, 4);
    for _ in 0..blocks {
        let len = s.range_inclusive(1, 3) as usize;
        let at = s.below((CELLS - len + 1) as u64) as usize;
        busy[at..at + len].iter_mut().for_each(|c| *c = true);
    }
    busy[0] = true;
    busy
}

pub fn draw_calendar(s: &mut Stream) -> Result<CalendarData, GenerationError> {
    for _ in 0..MAX_REJECTIONS {
        let d = CalendarData {
            duration: *s.pick(&[30u32, 60]),
            first: draw_busy(s),
            second: draw_busy(s),
        };
        if d.admissible() {
            return Ok(d);
        }
    }
    Err(GenerationError::RejectionLimit(
        "schedule_coordination".into(),
    ))
}

pub(crate) fn build_calendar(
    b: &mut Builder<'_>,
    d: &CalendarData,
) -> Result<(), InstantiateError> {
    let first = b.persona("first")?;
    let second = b.persona("second")?;
    b.set("duration", d.duration.to_string());
    let busy_first = format!("tomorrow {}", busy_text(&d.first));
    let busy_second = format!("tomorrow {}", busy_text(&d.second));
    b.set(
        "busy_first",
        format!("Busy slots of {}: {busy_first}", first.name),
    );
    b.set(
        "busy_second",
        format!("Busy slots of {}: {busy_second}", second.name),
    );
    b.clue("first_busy")?;
    b.clue("second_busy")?;
    b.row(CALENDAR_TABLE, &first.id, record([("busy", busy_first)]));
    b.row(CALENDAR_TABLE, &second.id, record([("busy", busy_second)]));
    let (start, end) = d
        .earliest_common()
        .ok_or_else(|| InstantiateError::MissingValue("common slot".into()))?;
    let slot = format!("{}-{}", hhmm(start), hhmm(end));
    b.checkpoint(
        "slot",
        Predicate::SubmissionMatches {
            matcher: Matcher::Fields {
                expected: [("slot".to_string(), slot.clone())].into(),
            },
        },
    )?;
    deadline(
        b,
        SubmissionForm::Fields {
            names: vec!["slot".into()],
        },
    )?;
    b.step(ToolCall::new("CheckCalendar").arg("person", first.name.clone()));
    b.step(ToolCall::new("CheckCalendar").arg("person", second.name.clone()));
    submit(b, format!("slot: {slot}"));
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InboxData {
    pub code: u32,
}

pub fn draw_inbox(s: &mut Stream) -> InboxData {
    InboxData {
        code: s.range_inclusive(1000, 9999) as u32,
    }
}

pub(crate) fn build_inbox(b: &mut Builder<'_>, d: &InboxData) -> Result<(), InstantiateError> {
    let at_min = b
        .draw
        .schedule
        .release_minute
        .ok_or_else(|| InstantiateError::MissingValue("release time".into()))?;
    let at = clock(b.date(), at_min);
    let colleague = b.persona("colleague")?;
    let room = b.label("room")?.to_string();
    b.set("code", d.code.to_string());
    b.reveal(Reveal::AtTime { at });
    let clue = b.clue("code")?;
    let info = b.clue_content(&clue).unwrap_or_default().to_string();
    b.row("facilities", &room, record([("info", info)]));
    let body = b.text("message")?;
    b.message(Message {
        from: colleague.email.clone(),
        to: crate::metatask::agent_email(),
        body,
        sent_at: at,
    });
    b.checkpoint("code", Predicate::ClueRevealed { clue })?;
    b.checkpoint(
        "sent",
        Predicate::MessageSent {
            to: colleague.id.clone(),
            keywords: [d.code.to_string()].into(),
        },
    )?;
    let answer = b.text("answer")?;
    b.step(
        ToolCall::new("QueryDatabase")
            .arg("table", "facilities")
            .arg("key", room),
    );
    b.step(
        ToolCall::new("SendMessage")
            .arg("receiver", colleague.email.clone())
            .arg("message", answer),
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn busy_spans_render_and_merge() {
        let mut busy = vec![false; CELLS];
        busy[0] = true;
        busy[1] = true;
        busy[8] = true;
        assert_eq!(busy_text(&busy), "09:00-10:00, 13:00-13:30");
    }

    #[test]
    fn drawn_calendars_need_both_clues() {
        for seed in 0..200 {
            let d = draw_calendar(&mut Stream::new(seed)).unwrap();
            assert!(d.admissible());
        }
    }
}
