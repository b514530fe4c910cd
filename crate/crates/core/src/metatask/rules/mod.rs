//! Per-rule data generation and instance wiring.

pub mod info;
pub mod inquiry;
pub mod strategy;
pub mod timing;

use serde::{Deserialize, Serialize};

use super::{Builder, MetaTaskRule, ScheduleDraw};
use crate::error::{GenerationError, InstantiateError};
use crate::rng::Stream;

pub use info::{MetricsData, SalesData, TransactionData, Tx};
pub use inquiry::{VendorData, WebsiteData};
pub use strategy::{coarse_density, AdsChannel, AdsData, EventData, EventVenue, DENSITY_LEVELS};
pub use timing::{CalendarData, InboxData};

/// Cap on rejection-sampling rounds for rules with admissibility checks.
pub(crate) const MAX_REJECTIONS: usize = 20_000;

/// Rule-specific generated values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "data", rename_all = "snake_case")]
pub enum RuleData {
    AdsCampaignPlanning(AdsData),
    ContactLookup(VendorData),
    DataCompletion(SalesData),
    EventPlanning(EventData),
    InboxTriage(InboxData),
    MeetingAttendance,
    ReportDrafting(MetricsData),
    ScheduleCoordination(CalendarData),
    TransactionAuditing(TransactionData),
    WebsiteMonitoring(WebsiteData),
}

impl RuleData {
    pub fn rule_id(&self) -> &'static str {
        match self {
            RuleData::AdsCampaignPlanning(_) => "ads_campaign_planning",
            RuleData::ContactLookup(_) => "contact_lookup",
            RuleData::DataCompletion(_) => "data_completion",
            RuleData::EventPlanning(_) => "event_planning",
            RuleData::InboxTriage(_) => "inbox_triage",
            RuleData::MeetingAttendance => "meeting_attendance",
            RuleData::ReportDrafting(_) => "report_drafting",
            RuleData::ScheduleCoordination(_) => "schedule_coordination",
            RuleData::TransactionAuditing(_) => "transaction_auditing",
            RuleData::WebsiteMonitoring(_) => "website_monitoring",
        }
    }
}

pub fn draw_env(rule_id: &str, s: &mut Stream) -> Result<RuleData, GenerationError> {
    Ok(match rule_id {
        "ads_campaign_planning" => RuleData::AdsCampaignPlanning(strategy::draw_ads(s)?),
        "contact_lookup" => RuleData::ContactLookup(inquiry::draw_vendor(s)),
        "data_completion" => RuleData::DataCompletion(info::draw_sales(s)),
        "event_planning" => RuleData::EventPlanning(strategy::draw_event(s)?),
        "inbox_triage" => RuleData::InboxTriage(timing::draw_inbox(s)),
        "meeting_attendance" => RuleData::MeetingAttendance,
        "report_drafting" => RuleData::ReportDrafting(info::draw_metrics(s)),
        "schedule_coordination" => RuleData::ScheduleCoordination(timing::draw_calendar(s)?),
        "transaction_auditing" => RuleData::TransactionAuditing(info::draw_transactions(s)),
        "website_monitoring" => RuleData::WebsiteMonitoring(inquiry::draw_website(s)),
        other => return Err(GenerationError::UnknownRule(other.to_string())),
    })
}

/// Meeting window for time-critical rules, publication time for timed ones.
pub fn draw_schedule(rule: &MetaTaskRule, s: &mut Stream) -> ScheduleDraw {
    let mut out = ScheduleDraw::default();
    if rule.time_critical {
        let duration = *s.pick(&[30u32, 60]);
        let starts = grid(9 * 60 + 30, 17 * 60 - duration);
        out.window = Some((*s.pick(&starts), duration));
    }
    if rule.rule_id == "inbox_triage" {
        out.release_minute = Some(*s.pick(&grid(10 * 60, 15 * 60)));
    }
    out
}

/// Half-hour grid points from `lo` to `hi` inclusive.
pub fn grid(lo: u32, hi: u32) -> Vec<u32> {
    (lo..=hi).step_by(30).collect()
}

pub(crate) fn build(b: &mut Builder<'_>, data: &RuleData) -> Result<(), InstantiateError> {
    match data {
        RuleData::AdsCampaignPlanning(d) => strategy::build_ads(b, d),
        RuleData::ContactLookup(d) => inquiry::build_contact(b, d),
        RuleData::DataCompletion(d) => info::build_sales(b, d),
        RuleData::EventPlanning(d) => strategy::build_event(b, d),
        RuleData::InboxTriage(d) => timing::build_inbox(b, d),
        RuleData::MeetingAttendance => timing::build_meeting(b),
        RuleData::ReportDrafting(d) => info::build_metrics(b, d),
        RuleData::ScheduleCoordination(d) => timing::build_calendar(b, d),
        RuleData::TransactionAuditing(d) => info::build_transactions(b, d),
        RuleData::WebsiteMonitoring(d) => inquiry::build_website(b, d),
    }
}

/// Shorthand for a one-field record.
pub(crate) fn record<const N: usize>(pairs: [(&str, String); N]) -> crate::world::Record {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// `a, b and c`.
pub(crate) fn join_words(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}
