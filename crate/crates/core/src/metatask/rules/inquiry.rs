//! Proactive-inquiry rules: contact lookup and website monitoring.

use chrono::Duration;
use serde::{Deserialize, Serialize};

use super::record;
use crate::error::InstantiateError;
use crate::metatask::{slugify, Builder};
use crate::npc::token_set;
use crate::rng::Stream;
use crate::tools::WEBSITE_TABLE;
use crate::verifier::checkpoint::Predicate;
use crate::world::ToolCall;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VendorData {
    /// Days from the scenario date until the contract expires.
    pub expiry_in_days: i64,
}

pub fn draw_vendor(s: &mut Stream) -> VendorData {
    VendorData {
        expiry_in_days: s.range_inclusive(14, 60),
    }
}

pub(crate) fn build_contact(b: &mut Builder<'_>, d: &VendorData) -> Result<(), InstantiateError> {
    let vendor = b.label("vendor")?.to_string();
    let owner = b.persona("owner")?;
    b.set(
        "expiry",
        (b.date() + Duration::days(d.expiry_in_days)).to_string(),
    );
    let clue = b.clue("owner")?;
    let info = b.clue_content(&clue).unwrap_or_default().to_string();
    b.row("vendor_owners", &vendor, record([("info", info)]));
    let mut keywords = token_set(&vendor);
    keywords.insert("contract".into());
    b.checkpoint("owner", Predicate::ClueRevealed { clue })?;
    b.checkpoint(
        "notified",
        Predicate::MessageSent {
            to: owner.id.clone(),
            keywords,
        },
    )?;
    let message = b.text("message")?;
    b.step(
        ToolCall::new("QueryDatabase")
            .arg("table", "vendor_owners")
            .arg("key", vendor),
    );
    b.step(
        ToolCall::new("SendMessage")
            .arg("receiver", owner.email.clone())
            .arg("message", message),
    );
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WebsiteData {
    pub usage: u32,
    pub auth_code: String,
    /// Days before the scenario date of the last good backup.
    pub backup_days_ago: i64,
}

pub fn draw_website(s: &mut Stream) -> WebsiteData {
    WebsiteData {
        usage: s.range_inclusive(91, 99) as u32,
        auth_code: format!("AUTH-{}", s.range_inclusive(1000, 9999)),
        backup_days_ago: s.range_inclusive(1, 6),
    }
}

pub(crate) fn build_website(b: &mut Builder<'_>, d: &WebsiteData) -> Result<(), InstantiateError> {
    let url = format!(
        "{}.knowledgex.com",
        slugify(b.label("site")?).replace('_', "-")
    );
    b.set("url", &url);
    b.set("usage", d.usage.to_string());
    b.set("auth_code", &d.auth_code);
    b.set(
        "backup",
        (b.date() - Duration::days(d.backup_days_ago)).to_string(),
    );
    let status = b.clue("status")?;
    b.clue("maintainer")?;
    b.clue("auth")?;
    b.replies()?;
    let page = b.text("page")?;
    b.row(WEBSITE_TABLE, &url, record([("content", page)]));
    let hr = b.persona("hr")?;
    let maintainer = b.persona("maintainer")?;
    let manager = b.persona("manager")?;
    b.checkpoint("status", Predicate::ClueRevealed { clue: status })?;
    b.checkpoint(
        "ask_hr",
        Predicate::NpcAsked {
            npc: hr.id.clone(),
            keywords: ["website".to_string(), "maintenance".to_string()].into(),
        },
    )?;
    b.checkpoint(
        "inform",
        Predicate::MessageSent {
            to: maintainer.id.clone(),
            keywords: ["database".to_string(), "full".to_string()].into(),
        },
    )?;
    b.checkpoint(
        "auth",
        Predicate::NpcAsked {
            npc: manager.id.clone(),
            keywords: ["authorization".to_string()].into(),
        },
    )?;
    let ask_hr = b.text("ask_hr")?;
    let ask_auth = b.text("ask_auth")?;
    let inform = b.text("inform")?;
    b.step(ToolCall::new("BrowseWebsite").arg("url", url));
    b.step(
        ToolCall::new("AskNPC")
            .arg("npc", hr.name.clone())
            .arg("message", ask_hr),
    );
    b.step(
        ToolCall::new("AskNPC")
            .arg("npc", manager.name.clone())
            .arg("message", ask_auth),
    );
    b.step(
        ToolCall::new("SendMessage")
            .arg("receiver", maintainer.email.clone())
            .arg("message", inform),
    );
    Ok(())
}
