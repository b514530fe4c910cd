//! Tool catalog, call validation and handlers.
//!
//! Every call, however malformed, produces a [`ToolResult`]; failures carry a
//! payload starting with `[Error]`. Schema errors mirror the messages a Python
//! tool runtime produces (`got an unexpected keyword argument`, `missing 1
//! required positional argument`) so logs read the same as real agent runs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::metatask::Custodian;
use crate::npc;
use crate::time::{Interval, SimTime};
use crate::world::{
    normalize_path, Activity, AttendanceSpan, EventBody, Meeting, Message, Notice, Submission,
    Table, ToolCall, WorldState, CLOUD_DISK,
};

pub const CATALOG_FORMAT: &str = "worksim.tools";
pub const CATALOG_VERSION: u32 = 1;

/// Minutes charged for a call to a tool that does not declare a cost.
pub const DEFAULT_TIME_COST: i64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamType {
    /// Short identifier-like string (path, id, name, url).
    String,
    /// Free text.
    Text,
    /// Timestamp: `HH:MM` (today) or `YYYY-MM-DD HH:MM[:SS]`.
    Datetime,
    /// List of strings, as an array or a comma-separated string.
    List,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: ParamType,
    pub required: bool,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub family: String,
    pub description: String,
    pub parameters: Vec<ParamSpec>,
    pub time_cost: i64,
    pub read_only: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolStatus {
    Ok,
    Error,
}

/// Resolved evidence of what a successful call did, used by the verifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Effect {
    FolderOpened { path: String },
    FileRead { path: String },
    FileWritten { path: String },
    MessageSent { to: String, message: String },
    NpcAsked { npc: String, message: String },
    CalendarChecked { person: Option<String> },
    MeetingScheduled { meeting_id: String },
    MeetingJoined { meeting_id: String },
    MeetingLeft { meeting_id: String },
    DatabaseQueried { table: String, key: Option<String> },
    WebsiteBrowsed { url: String },
    Waited { until: SimTime },
    Submitted { task_id: String },
    NoteTaken,
    ContactsListed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResult {
    pub call_id: String,
    pub tool_name: String,
    pub status: ToolStatus,
    pub payload: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effect: Option<Effect>,
    pub issued_at: SimTime,
    pub clock_after: SimTime,
}

impl ToolResult {
    pub fn is_ok(&self) -> bool {
        self.status == ToolStatus::Ok
    }
}

/// What a handler did; the world turns this into a [`ToolResult`].
#[derive(Debug, Clone)]
pub struct ExecOutcome {
    pub status: ToolStatus,
    pub payload: String,
    pub effect: Option<Effect>,
    pub notices: Vec<Notice>,
    pub time_cost: i64,
    /// Absolute clock target (WaitUntil); overrides `time_cost`.
    pub advance_to: Option<SimTime>,
}

impl ExecOutcome {
    fn ok(payload: impl Into<String>, effect: Effect, cost: i64) -> Self {
        ExecOutcome {
            status: ToolStatus::Ok,
            payload: payload.into(),
            effect: Some(effect),
            notices: Vec::new(),
            time_cost: cost,
            advance_to: None,
        }
    }

    fn err(message: impl Into<String>, cost: i64) -> Self {
        let message = message.into();
        debug_assert!(message.starts_with("[Error]"));
        ExecOutcome {
            status: ToolStatus::Error,
            payload: message,
            effect: None,
            notices: Vec::new(),
            time_cost: cost,
            advance_to: None,
        }
    }
}

fn p(name: &str, kind: ParamType, required: bool, description: &str) -> ParamSpec {
    ParamSpec {
        name: name.into(),
        kind,
        required,
        description: description.into(),
    }
}

fn spec(
    name: &str,
    family: &str,
    description: &str,
    parameters: Vec<ParamSpec>,
    time_cost: i64,
    read_only: bool,
) -> ToolSpec {
    ToolSpec {
        name: name.into(),
        family: family.into(),
        description: description.into(),
        parameters,
        time_cost,
        read_only,
    }
}

/// The tool catalog in its stable order.
pub fn catalog() -> Vec<ToolSpec> {
    use ParamType::*;
    vec![
        spec(
            "OpenFolderInCloudDisk",
            "files",
            "List the files and sub-folders of a cloud-disk folder. Paths look like CloudDisk://folder/.",
            vec![p("path", String, false, "Folder to open; defaults to the root CloudDisk://.")],
            1,
            true,
        ),
        spec(
            "ReadFile",
            "files",
            "Read the content of a file on the cloud disk.",
            vec![p("path", String, true, "File path, e.g. CloudDisk://folder/file.md.")],
            1,
            true,
        ),
        spec(
            "WriteFile",
            "files",
            "Create or overwrite a file on the cloud disk. Shared documents are read-only.",
            vec![
                p("path", String, true, "File path to write."),
                p("content", Text, true, "Full file content."),
            ],
            1,
            false,
        ),
        spec(
            "SendMessage",
            "messaging",
            "Send a message to a colleague by e-mail address or full name.",
            vec![
                p("receiver", String, true, "E-mail address or full name of the receiver."),
                p("message", Text, true, "Message body."),
                p("sender", String, false, "Your own user id; ignored, messages are always sent as you."),
            ],
            1,
            false,
        ),
        spec(
            "ListContacts",
            "messaging",
            "List every colleague you can contact, with role, department and e-mail.",
            vec![],
            1,
            true,
        ),
        spec(
            "AskNPC",
            "messaging",
            "Talk to a colleague directly and get their reply.",
            vec![
                p("npc", String, true, "Full name or e-mail address of the colleague."),
                p("message", Text, true, "What you say."),
            ],
            1,
            false,
        ),
        spec(
            "CheckCalendar",
            "calendar",
            "Show your own meetings, or the busy slots of a colleague when `person` is given.",
            vec![p("person", String, false, "Colleague name or e-mail; omit for your own calendar.")],
            1,
            true,
        ),
        spec(
            "ScheduleMeeting",
            "calendar",
            "Put a new meeting on the calendar.",
            vec![
                p("title", String, true, "Meeting title."),
                p("participants", List, true, "Names or e-mails of the invitees."),
                p("start", Datetime, true, "Start time, HH:MM or YYYY-MM-DD HH:MM."),
                p("end", Datetime, true, "End time, HH:MM or YYYY-MM-DD HH:MM."),
            ],
            1,
            false,
        ),
        spec(
            "AttendMeeting",
            "calendar",
            "Join a meeting on your calendar that is currently in progress.",
            vec![p("meeting_id", String, true, "Id of the meeting, as shown by CheckCalendar.")],
            1,
            false,
        ),
        spec("LeaveMeeting", "calendar", "Leave the meeting you are attending.", vec![], 1, false),
        spec(
            "QueryDatabase",
            "data",
            "Read records from a company database table; give `key` to fetch one record.",
            vec![
                p("table", String, true, "Table name."),
                p("key", String, false, "Record key; omit to list every record."),
            ],
            1,
            true,
        ),
        spec(
            "BrowseWebsite",
            "data",
            "Open a web page and read its content.",
            vec![p("url", String, true, "Page address.")],
            1,
            true,
        ),
        spec(
            "WaitUntil",
            "misc",
            "Do nothing until the given time. Events that happen meanwhile are reported.",
            vec![p("time", Datetime, true, "Target time, HH:MM or YYYY-MM-DD HH:MM.")],
            0,
            false,
        ),
        spec(
            "SubmitResult",
            "misc",
            "Hand in your result for a task (reports, plans, findings). The latest submission counts.",
            vec![
                p("task_id", String, true, "Task id, e.g. T1."),
                p("content", Text, true, "The result, using `field: value` lines where the task asks for fields."),
            ],
            1,
            false,
        ),
        spec(
            "TakeNote",
            "misc",
            "Append a line to your private notes.",
            vec![p("text", Text, true, "Note text.")],
            1,
            false,
        ),
    ]
}

pub fn find_spec(name: &str) -> Option<ToolSpec> {
    catalog().into_iter().find(|s| s.name == name)
}

/// Catalog as the versioned JSON document shown to agents.
pub fn catalog_document() -> Vec<u8> {
    crate::canonical::encode_envelope(CATALOG_FORMAT, CATALOG_VERSION, &catalog())
}

fn call_error(tool: &str, detail: &str) -> String {
    format!("[Error] The following error occurred when you called the tool {tool}: {detail}")
}

fn python_name_list(names: &[&str]) -> String {
    let quoted: Vec<String> = names.iter().map(|n| format!("'{n}'")).collect();
    match quoted.len() {
        0 => String::new(),
        1 => quoted[0].clone(),
        2 => format!("{} and {}", quoted[0], quoted[1]),
        _ => format!(
            "{}, and {}",
            quoted[..quoted.len() - 1].join(", "),
            quoted[quoted.len() - 1]
        ),
    }
}

/// Checks a call against its spec. The error is the full `[Error]` message.
pub fn validate(call: &ToolCall, spec: &ToolSpec) -> Result<(), String> {
    let tool = &spec.name;
    for name in call.arguments.keys() {
        if !spec.parameters.iter().any(|p| &p.name == name) {
            return Err(call_error(
                tool,
                &format!("{tool}.__call__() got an unexpected keyword argument '{name}'."),
            ));
        }
    }
    let missing: Vec<&str> = spec
        .parameters
        .iter()
        .filter(|p| p.required && !call.arguments.contains_key(&p.name))
        .map(|p| p.name.as_str())
        .collect();
    if !missing.is_empty() {
        let noun = if missing.len() == 1 {
            "argument"
        } else {
            "arguments"
        };
        return Err(call_error(
            tool,
            &format!(
                "{tool}.__call__() missing {} required positional {noun}: {}.",
                missing.len(),
                python_name_list(&missing)
            ),
        ));
    }
    for param in &spec.parameters {
        let Some(v) = call.arguments.get(&param.name) else {
            continue;
        };
        let ok = match param.kind {
            ParamType::String | ParamType::Text | ParamType::Datetime => scalar_text(v).is_some(),
            ParamType::List => list_values(v).is_some(),
        };
        if !ok {
            let want = match param.kind {
                ParamType::List => "a list of strings",
                ParamType::Datetime => "a time string",
                _ => "a string",
            };
            return Err(call_error(
                tool,
                &format!("argument '{}' must be {want}.", param.name),
            ));
        }
    }
    Ok(())
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn list_values(v: &Value) -> Option<Vec<String>> {
    match v {
        Value::Array(items) => items.iter().map(scalar_text).collect(),
        Value::String(s) => Some(
            s.split(',')
                .map(|x| x.trim().to_string())
                .filter(|x| !x.is_empty())
                .collect(),
        ),
        _ => None,
    }
}

struct Args<'a>(&'a BTreeMap<String, Value>);

impl Args<'_> {
    fn text(&self, name: &str) -> Option<String> {
        self.0.get(name).and_then(scalar_text)
    }

    fn req(&self, name: &str) -> String {
        self.text(name).unwrap_or_default()
    }

    fn list(&self, name: &str) -> Vec<String> {
        self.0.get(name).and_then(list_values).unwrap_or_default()
    }
}

/// Finds an NPC by id, e-mail or full name (case-insensitive).
pub fn resolve_contact(state: &WorldState, who: &str) -> Option<String> {
    let who = who.trim();
    let lower = who.to_lowercase();
    let slug = npc::slug(who);
    state
        .npcs
        .values()
        .find(|n| {
            n.profile.email.to_lowercase() == lower
                || n.profile.name.to_lowercase() == lower
                || (!slug.is_empty() && n.profile.id == slug)
        })
        .map(|n| n.profile.id.clone())
}

/// Validates and runs one call against `state`.
pub fn execute(state: &mut WorldState, call: &ToolCall) -> ExecOutcome {
    let Some(spec) = find_spec(&call.name) else {
        let names: Vec<String> = catalog().into_iter().map(|s| s.name).collect();
        return ExecOutcome::err(
            format!(
                "[Error] Unknown tool '{}'. Valid tools: {}.",
                call.name,
                names.join(", ")
            ),
            DEFAULT_TIME_COST,
        );
    };
    if let Err(msg) = validate(call, &spec) {
        return ExecOutcome::err(msg, spec.time_cost);
    }
    let args = Args(&call.arguments);
    let cost = spec.time_cost;
    match spec.name.as_str() {
        "OpenFolderInCloudDisk" => open_folder(state, &args.text("path").unwrap_or_default(), cost),
        "ReadFile" => read_file(state, &args.req("path"), cost),
        "WriteFile" => write_file(state, &args.req("path"), &args.req("content"), cost),
        "SendMessage" => send_message(state, &args.req("receiver"), &args.req("message"), cost),
        "ListContacts" => list_contacts(state, cost),
        "AskNPC" => ask_npc(state, &args.req("npc"), &args.req("message"), cost),
        "CheckCalendar" => check_calendar(state, args.text("person"), cost),
        "ScheduleMeeting" => schedule_meeting(
            state,
            &args.req("title"),
            &args.list("participants"),
            &args.req("start"),
            &args.req("end"),
            cost,
        ),
        "AttendMeeting" => attend_meeting(state, &args.req("meeting_id"), cost),
        "LeaveMeeting" => leave_meeting(state, cost),
        "QueryDatabase" => query_database(state, &args.req("table"), args.text("key"), cost),
        "BrowseWebsite" => browse_website(state, &args.req("url"), cost),
        "WaitUntil" => wait_until(state, &args.req("time"), cost),
        "SubmitResult" => submit_result(state, &args.req("task_id"), &args.req("content"), cost),
        "TakeNote" => take_note(state, &args.req("text"), cost),
        other => unreachable!("catalog tool {other} has no handler"),
    }
}

/// Names of tools that have a handler in [`execute`].
pub const HANDLED_TOOLS: [&str; 15] = [
    "OpenFolderInCloudDisk",
    "ReadFile",
    "WriteFile",
    "SendMessage",
    "ListContacts",
    "AskNPC",
    "CheckCalendar",
    "ScheduleMeeting",
    "AttendMeeting",
    "LeaveMeeting",
    "QueryDatabase",
    "BrowseWebsite",
    "WaitUntil",
    "SubmitResult",
    "TakeNote",
];

fn reveal_matching(state: &mut WorldState, pred: impl Fn(&Custodian) -> bool) {
    let hits: Vec<String> = state
        .clue_index
        .iter()
        .filter(|(_, c)| pred(c))
        .map(|(id, _)| id.clone())
        .collect();
    for id in hits {
        state.revealed_clues.insert(id);
    }
}

fn open_folder(state: &mut WorldState, path: &str, cost: i64) -> ExecOutcome {
    let mut dir = normalize_path(path);
    if !dir.ends_with('/') {
        dir.push('/');
    }
    let mut dirs = std::collections::BTreeSet::new();
    let mut files = Vec::new();
    for key in state.files.keys() {
        if let Some(rest) = key.strip_prefix(&dir) {
            match rest.split_once('/') {
                Some((sub, _)) => {
                    dirs.insert(sub.to_string());
                }
                None => files.push(rest.to_string()),
            }
        }
    }
    let is_root = dir == CLOUD_DISK || dir == format!("{CLOUD_DISK}/");
    if dirs.is_empty() && files.is_empty() && !is_root {
        return ExecOutcome::err(format!("[Error] Folder '{path}' does not exist."), cost);
    }
    let mut out = format!("Contents of {dir}:");
    for d in &dirs {
        out.push_str(&format!("\n  [folder] {d}/"));
    }
    for f in &files {
        out.push_str(&format!("\n  [file] {f}"));
    }
    if dirs.is_empty() && files.is_empty() {
        out.push_str("\n  (empty)");
    }
    ExecOutcome::ok(out, Effect::FolderOpened { path: dir }, cost)
}

fn read_file(state: &mut WorldState, path: &str, cost: i64) -> ExecOutcome {
    let key = normalize_path(path);
    let Some(entry) = state.files.get(&key) else {
        return ExecOutcome::err(format!("[Error] File '{path}' does not exist."), cost);
    };
    let content = entry.content.clone();
    reveal_matching(
        state,
        |c| matches!(c, Custodian::File { path } if *path == key),
    );
    ExecOutcome::ok(content, Effect::FileRead { path: key }, cost)
}

fn write_file(state: &mut WorldState, path: &str, content: &str, cost: i64) -> ExecOutcome {
    let key = normalize_path(path);
    if key == CLOUD_DISK || key.ends_with('/') {
        return ExecOutcome::err(format!("[Error] '{path}' is not a file path."), cost);
    }
    if state.files.get(&key).is_some_and(|f| f.read_only) {
        return ExecOutcome::err(
            format!("[Error] Permission denied: '{path}' is read-only."),
            cost,
        );
    }
    state.files.insert(
        key.clone(),
        crate::world::FileEntry {
            content: content.to_string(),
            read_only: false,
        },
    );
    ExecOutcome::ok(
        format!("Wrote {} characters to {key}.", content.chars().count()),
        Effect::FileWritten { path: key },
        cost,
    )
}

fn send_message(state: &mut WorldState, receiver: &str, message: &str, cost: i64) -> ExecOutcome {
    let Some(id) = resolve_contact(state, receiver) else {
        return ExecOutcome::err(
            format!("[Error] Could not found receiver '{receiver}', Please ensure that the contact exists."),
            cost,
        );
    };
    let profile = state.npcs[&id].profile.clone();
    state.message_log.push(Message {
        from: state.agent.persona.email.clone(),
        to: profile.email.clone(),
        body: message.to_string(),
        sent_at: state.clock,
    });
    ExecOutcome::ok(
        format!("Message sent to {} <{}>.", profile.name, profile.email),
        Effect::MessageSent {
            to: id,
            message: message.to_string(),
        },
        cost,
    )
}

fn list_contacts(state: &mut WorldState, cost: i64) -> ExecOutcome {
    let mut out = String::from("Contacts:");
    for c in state.contacts() {
        out.push_str(&format!(
            "\n- {} | {} | {} | {}",
            c.name, c.role, c.department, c.email
        ));
    }
    ExecOutcome::ok(out, Effect::ContactsListed, cost)
}

fn ask_npc(state: &mut WorldState, who: &str, message: &str, cost: i64) -> ExecOutcome {
    let Some(id) = resolve_contact(state, who) else {
        return ExecOutcome::err(
            format!(
                "[Error] Could not found receiver '{who}', Please ensure that the contact exists."
            ),
            cost,
        );
    };
    let at = state.clock;
    let agent_name = state.agent.persona.name.clone();
    let npc_state = state.npcs.get_mut(&id).expect("resolved npc");
    let response = npc::respond(npc_state, message);
    npc_state.dialogue_log.push(npc::DialogueLine {
        at,
        speaker: agent_name,
        text: message.to_string(),
    });
    npc_state.dialogue_log.push(npc::DialogueLine {
        at,
        speaker: npc_state.profile.name.clone(),
        text: response.reply.clone(),
    });
    let name = npc_state.profile.name.clone();
    if let Some(clue) = &response.released {
        state.reveal(clue);
    }
    ExecOutcome::ok(
        format!("{name}: {}", response.reply),
        Effect::NpcAsked {
            npc: id,
            message: message.to_string(),
        },
        cost,
    )
}

pub const CALENDAR_TABLE: &str = "_calendars";
pub const WEBSITE_TABLE: &str = "_websites";

fn check_calendar(state: &mut WorldState, person: Option<String>, cost: i64) -> ExecOutcome {
    match person.filter(|p| !p.trim().is_empty()) {
        None => {
            let mut out = format!("Your calendar ({}):", state.clock.date());
            if state.calendar.is_empty() {
                out.push_str("\n  (no meetings)");
            }
            for m in &state.calendar {
                out.push_str(&format!(
                    "\n- {} | {} | {} | {}",
                    m.meeting_id, m.interval, m.title, m.room
                ));
            }
            ExecOutcome::ok(out, Effect::CalendarChecked { person: None }, cost)
        }
        Some(who) => {
            let Some(id) = resolve_contact(state, &who) else {
                return ExecOutcome::err(
                    format!("[Error] Could not find a calendar for '{who}'."),
                    cost,
                );
            };
            let name = state.npcs[&id].profile.name.clone();
            let row = state
                .datastore
                .get(CALENDAR_TABLE)
                .and_then(|t| t.rows.get(&id))
                .cloned();
            let out = match &row {
                Some(r) => format!(
                    "Busy slots of {name}: {}",
                    r.get("busy").cloned().unwrap_or_default()
                ),
                None => format!("{name} has no busy slots today."),
            };
            if row.is_some() {
                reveal_matching(
                    state,
                    |c| matches!(c, Custodian::Data { table, key } if table == CALENDAR_TABLE && *key == id),
                );
            }
            ExecOutcome::ok(out, Effect::CalendarChecked { person: Some(id) }, cost)
        }
    }
}

fn parse_time(state: &WorldState, text: &str) -> Option<SimTime> {
    SimTime::parse_relative(text, state.clock.date())
}

fn schedule_meeting(
    state: &mut WorldState,
    title: &str,
    participants: &[String],
    start: &str,
    end: &str,
    cost: i64,
) -> ExecOutcome {
    let (Some(s), Some(e)) = (parse_time(state, start), parse_time(state, end)) else {
        return ExecOutcome::err(
            format!("[Error] Could not parse meeting time '{start}' - '{end}'."),
            cost,
        );
    };
    if e <= s {
        return ExecOutcome::err(
            "[Error] Meeting end must be after its start.".to_string(),
            cost,
        );
    }
    if s < state.clock {
        return ExecOutcome::err(
            format!(
                "[Error] Cannot schedule a meeting in the past ({}).",
                s.hhmm()
            ),
            cost,
        );
    }
    let mut ids = Vec::new();
    for who in participants {
        match resolve_contact(state, who) {
            Some(id) => ids.push(id),
            None => {
                return ExecOutcome::err(
                    format!("[Error] Could not found receiver '{who}', Please ensure that the contact exists."),
                    cost,
                )
            }
        }
    }
    let meeting_id = format!("MTG-{:03}", state.calendar.len() + 1);
    let interval = Interval::new(s, e);
    state.calendar.push(Meeting {
        meeting_id: meeting_id.clone(),
        title: title.to_string(),
        organizer: None,
        participants: ids,
        room: "Online".into(),
        interval,
        task_id: None,
        attendance: Vec::new(),
    });
    state.push_event(
        s,
        EventBody::MeetingStart {
            meeting_id: meeting_id.clone(),
        },
    );
    state.push_event(
        e,
        EventBody::MeetingEnd {
            meeting_id: meeting_id.clone(),
        },
    );
    ExecOutcome::ok(
        format!("Meeting '{title}' scheduled as {meeting_id} for {interval}."),
        Effect::MeetingScheduled { meeting_id },
        cost,
    )
}

fn attend_meeting(state: &mut WorldState, meeting_id: &str, cost: i64) -> ExecOutcome {
    let now = state.clock;
    let Some(m) = state.meeting(meeting_id).cloned() else {
        return ExecOutcome::err(
            format!("[Error] Meeting '{meeting_id}' is not on your calendar."),
            cost,
        );
    };
    if !m.interval.contains(now) {
        return ExecOutcome::err(
            format!(
                "[Error] Meeting '{meeting_id}' is not in progress (scheduled {}, current time {}).",
                m.interval,
                now.hhmm()
            ),
            cost,
        );
    }
    if state.agent.current_activity == Activity::InMeeting(meeting_id.to_string()) {
        return ExecOutcome::err(
            format!("[Error] You are already attending '{meeting_id}'."),
            cost,
        );
    }
    if let Activity::InMeeting(other) = state.agent.current_activity.clone() {
        close_attendance(state, &other, now);
    }
    state
        .meeting_mut(meeting_id)
        .expect("meeting exists")
        .attendance
        .push(AttendanceSpan {
            join: now,
            leave: None,
        });
    state.agent.current_activity = Activity::InMeeting(meeting_id.to_string());
    let organizer = m
        .organizer
        .as_ref()
        .and_then(|id| state.npcs.get(id))
        .map(|n| n.profile.name.clone())
        .unwrap_or_else(|| "The organizer".to_string());
    let mut notices = Vec::new();
    for task in state
        .meeting_reveals
        .get(meeting_id)
        .cloned()
        .unwrap_or_default()
    {
        notices.extend(state.release_task(
            &task,
            now,
            Some(&format!("[Meeting {meeting_id}] {organizer}")),
        ));
    }
    let mut out = ExecOutcome::ok(
        format!("You joined '{}' ({meeting_id}) in {}.", m.title, m.room),
        Effect::MeetingJoined {
            meeting_id: meeting_id.to_string(),
        },
        cost,
    );
    out.notices = notices;
    out
}

fn close_attendance(state: &mut WorldState, meeting_id: &str, at: SimTime) {
    if let Some(m) = state.meeting_mut(meeting_id) {
        for span in m.attendance.iter_mut().filter(|s| s.leave.is_none()) {
            span.leave = Some(at);
        }
    }
}

fn leave_meeting(state: &mut WorldState, cost: i64) -> ExecOutcome {
    let Activity::InMeeting(id) = state.agent.current_activity.clone() else {
        return ExecOutcome::err("[Error] You are not attending a meeting.".to_string(), cost);
    };
    let now = state.clock;
    close_attendance(state, &id, now);
    state.agent.current_activity = Activity::Idle;
    ExecOutcome::ok(
        format!("You left {id}."),
        Effect::MeetingLeft { meeting_id: id },
        cost,
    )
}

fn render_record(key: &str, record: &crate::world::Record) -> String {
    let mut out = format!("key: {key}");
    for (k, v) in record {
        out.push_str(&format!("\n  {k}: {v}"));
    }
    out
}

fn query_database(
    state: &mut WorldState,
    table: &str,
    key: Option<String>,
    cost: i64,
) -> ExecOutcome {
    let table = table.trim();
    let Some(t) = state
        .datastore
        .get(table)
        .filter(|_| !Table::is_system(table))
    else {
        return ExecOutcome::err(format!("[Error] Table '{table}' does not exist."), cost);
    };
    let key = key
        .filter(|k| !k.trim().is_empty())
        .map(|k| k.trim().to_string());
    let (out, keys): (String, Vec<String>) = match &key {
        Some(k) => match t.rows.get(k) {
            Some(r) => (render_record(k, r), vec![k.clone()]),
            None => {
                return ExecOutcome::err(
                    format!("[Error] No record with key '{k}' in table '{table}'."),
                    cost,
                )
            }
        },
        None => {
            let mut out = format!("Table {table} ({} records):", t.rows.len());
            for (k, r) in &t.rows {
                out.push('\n');
                out.push_str(&render_record(k, r));
            }
            (out, t.rows.keys().cloned().collect())
        }
    };
    let table_name = table.to_string();
    reveal_matching(
        state,
        |c| matches!(c, Custodian::Data { table, key } if *table == table_name && keys.contains(key)),
    );
    ExecOutcome::ok(
        out,
        Effect::DatabaseQueried {
            table: table_name,
            key,
        },
        cost,
    )
}

/// `https://www.x.com/status/` -> `www.x.com/status`.
pub fn normalize_url(url: &str) -> String {
    let u = url.trim();
    let u = u
        .strip_prefix("https://")
        .or_else(|| u.strip_prefix("http://"))
        .unwrap_or(u);
    u.trim_end_matches('/').to_lowercase()
}

fn browse_website(state: &mut WorldState, url: &str, cost: i64) -> ExecOutcome {
    let key = normalize_url(url);
    let Some(page) = state
        .datastore
        .get(WEBSITE_TABLE)
        .and_then(|t| t.rows.get(&key))
        .and_then(|r| r.get("content"))
        .cloned()
    else {
        return ExecOutcome::err(format!("[Error] Could not reach '{url}'."), cost);
    };
    reveal_matching(
        state,
        |c| matches!(c, Custodian::Data { table, key: k } if table == WEBSITE_TABLE && *k == key),
    );
    ExecOutcome::ok(page, Effect::WebsiteBrowsed { url: key }, cost)
}

fn wait_until(state: &mut WorldState, time: &str, cost: i64) -> ExecOutcome {
    let Some(t) = parse_time(state, time) else {
        return ExecOutcome::err(format!("[Error] Could not parse time '{time}'."), cost);
    };
    if t < state.clock {
        return ExecOutcome::err(
            format!(
                "[Error] Cannot wait until {}: it is already {}.",
                t.hhmm(),
                state.clock.hhmm()
            ),
            cost,
        );
    }
    let mut out = ExecOutcome::ok(
        format!("Waited until {}.", t.display_long()),
        Effect::Waited { until: t },
        cost,
    );
    out.advance_to = Some(t);
    out
}

fn submit_result(state: &mut WorldState, task_id: &str, content: &str, cost: i64) -> ExecOutcome {
    let task_id = task_id.trim();
    if !state.released_tasks.contains(task_id) {
        return ExecOutcome::err(format!("[Error] Unknown task '{task_id}'."), cost);
    }
    state
        .submissions
        .entry(task_id.to_string())
        .or_default()
        .push(Submission {
            at: state.clock,
            content: content.to_string(),
        });
    if !matches!(state.agent.current_activity, Activity::InMeeting(_)) {
        state.agent.current_activity = Activity::Working(task_id.to_string());
    }
    ExecOutcome::ok(
        format!("Result for task {task_id} recorded."),
        Effect::Submitted {
            task_id: task_id.to_string(),
        },
        cost,
    )
}

fn take_note(state: &mut WorldState, text: &str, cost: i64) -> ExecOutcome {
    if !state.agent.notes.is_empty() {
        state.agent.notes.push('\n');
    }
    state.agent.notes.push_str(text);
    ExecOutcome::ok("Note saved.", Effect::NoteTaken, cost)
}

/// Renders one executed call in the plain-text environment log format.
pub fn render_log_entry(
    agent_name: &str,
    result: &ToolResult,
    arguments: &BTreeMap<String, Value>,
) -> String {
    format!(
        "[{agent_name}] Tool Calls:\n\nID: {}\nTool Name: {}()\nArguments: {}\nExecute Results:\n{}",
        result.call_id,
        result.tool_name,
        serde_json::to_string(arguments).unwrap_or_default(),
        result.payload
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_has_handlers_and_unique_params() {
        let cat = catalog();
        assert_eq!(cat.len(), 15);
        let names: Vec<&str> = cat.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, HANDLED_TOOLS);
        for s in &cat {
            assert!(!s.description.is_empty());
            let mut seen = std::collections::BTreeSet::new();
            for p in &s.parameters {
                assert!(seen.insert(&p.name), "{} repeats {}", s.name, p.name);
            }
        }
        assert_eq!(catalog(), cat);
    }

    #[test]
    fn unexpected_keyword_message() {
        let spec = find_spec("OpenFolderInCloudDisk").unwrap();
        let call = ToolCall::new("OpenFolderInCloudDisk")
            .arg("command", "cat./manuals_for_data_completion.md");
        assert_eq!(
            validate(&call, &spec).unwrap_err(),
            "[Error] The following error occurred when you called the tool OpenFolderInCloudDisk: \
             OpenFolderInCloudDisk.__call__() got an unexpected keyword argument 'command'."
        );
    }

    #[test]
    fn missing_parameter_is_named() {
        let spec = find_spec("SendMessage").unwrap();
        let call = ToolCall::new("SendMessage").arg("message", "hi");
        let err = validate(&call, &spec).unwrap_err();
        assert!(
            err.ends_with("missing 1 required positional argument: 'receiver'."),
            "{err}"
        );
        let call = ToolCall::new("SendMessage");
        let err = validate(&call, &spec).unwrap_err();
        assert!(
            err.ends_with("missing 2 required positional arguments: 'receiver' and 'message'."),
            "{err}"
        );
    }

    #[test]
    fn well_formed_read_is_valid() {
        let spec = find_spec("ReadFile").unwrap();
        assert!(validate(
            &ToolCall::new("ReadFile").arg("path", "CloudDisk://a.md"),
            &spec
        )
        .is_ok());
        let bad = ToolCall::new("ReadFile").arg("path", serde_json::json!({"x": 1}));
        assert!(validate(&bad, &spec)
            .unwrap_err()
            .contains("must be a string"));
    }

    #[test]
    fn list_coercion() {
        assert_eq!(
            list_values(&Value::from("a, b,,c")).unwrap(),
            vec!["a", "b", "c"]
        );
        assert_eq!(
            list_values(&serde_json::json!(["a", 1])).unwrap(),
            vec!["a", "1"]
        );
        assert!(list_values(&serde_json::json!({})).is_none());
    }

    #[test]
    fn url_normalization() {
        assert_eq!(
            normalize_url("https://Status.Example.com/"),
            "status.example.com"
        );
    }
}
