//! Rule-matching NPC responder.
//!
//! An NPC holds an ordered list of [`ReplyRule`]s. A message is normalized to
//! lowercase alphanumeric tokens; the first rule whose trigger matches fires,
//! returning its reply and optionally releasing a clue. Nothing matches: the
//! fixed [`DEFAULT_REPLY`].

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::time::SimTime;
use crate::world::{ClueId, NpcId};

pub const DEFAULT_REPLY: &str = "I'm not sure I can help with that — could you be more specific?";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NpcProfile {
    pub id: NpcId,
    pub name: String,
    pub role: String,
    pub department: String,
    pub email: String,
}

impl NpcProfile {
    pub fn new(name: &str, role: &str, department: &str, domain: &str) -> Self {
        let id = slug(name);
        NpcProfile {
            email: format!("{}@{domain}", id.replace('_', ".")),
            id,
            name: name.to_string(),
            role: role.to_string(),
            department: department.to_string(),
        }
    }
}

/// `"Sarah Thomas"` -> `"sarah_thomas"`.
pub fn slug(name: &str) -> String {
    normalize(name).join("_")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchPolicy {
    AllOf,
    AnyOf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trigger {
    pub keywords: BTreeSet<String>,
    pub policy: MatchPolicy,
}

impl Trigger {
    pub fn all_of<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Trigger {
            keywords: words
                .into_iter()
                .flat_map(|w| normalize(w.as_ref()))
                .collect(),
            policy: MatchPolicy::AllOf,
        }
    }

    pub fn matches(&self, tokens: &BTreeSet<String>) -> bool {
        if self.keywords.is_empty() {
            return false;
        }
        match self.policy {
            MatchPolicy::AllOf => self.keywords.iter().all(|k| tokens.contains(k)),
            MatchPolicy::AnyOf => self.keywords.iter().any(|k| tokens.contains(k)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplyRule {
    pub trigger: Trigger,
    pub reply: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub releases: Option<ClueId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NpcMode {
    Scripted,
    ModelBacked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueLine {
    pub at: SimTime,
    pub speaker: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NpcState {
    pub profile: NpcProfile,
    pub reply_rules: Vec<ReplyRule>,
    pub default_reply: String,
    pub dialogue_log: Vec<DialogueLine>,
    pub mode: NpcMode,
}

impl NpcState {
    pub fn scripted(profile: NpcProfile, reply_rules: Vec<ReplyRule>) -> Self {
        NpcState {
            profile,
            reply_rules,
            default_reply: DEFAULT_REPLY.to_string(),
            dialogue_log: Vec::new(),
            mode: NpcMode::Scripted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub reply: String,
    pub released: Option<ClueId>,
    pub rule_index: Option<usize>,
}

/// Lowercase, split on whitespace and punctuation, keep alphanumeric runs.
pub fn normalize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

pub fn token_set(text: &str) -> BTreeSet<String> {
    normalize(text).into_iter().collect()
}

/// Index of the first rule that fires for `message`.
pub fn matching_rule(npc: &NpcState, message: &str) -> Option<usize> {
    let tokens = token_set(message);
    npc.reply_rules
        .iter()
        .position(|r| r.trigger.matches(&tokens))
}

/// Computes the NPC's reply without touching any state.
pub fn respond(npc: &NpcState, message: &str) -> Response {
    match matching_rule(npc, message) {
        Some(i) => {
            let rule = &npc.reply_rules[i];
            Response {
                reply: rule.reply.clone(),
                released: rule.releases.clone(),
                rule_index: Some(i),
            }
        }
        None => Response {
            reply: npc.default_reply.clone(),
            released: None,
            rule_index: None,
        },
    }
}

/// System prompt for model-backed NPCs: persona, the intern they help, and
/// the condition -> reply table.
pub fn render_system_prompt(npc: &NpcState, intern: &str) -> String {
    let p = &npc.profile;
    let mut out = format!(
        "You are {}, a {} of department {}.\n\n\
         {intern} is a new intern at your company and isn't familiar with the various operations. \
         When the intern asks you for help, you can direct them to the relevant manuals to complete the task.\n\n\
         Please note that you can only ask {intern} to consult the relevant manual or reply with specific content, \
         depending on the specific situation; Do NOT provide irrelevant information or additional details.\n\n\
         Here are some relevant manuals or reply templates:\n",
        p.name, p.role, p.department
    );
    for rule in &npc.reply_rules {
        let words: Vec<&str> = rule.trigger.keywords.iter().map(String::as_str).collect();
        out.push_str(&format!(
            "- If asked about {}, reply: \"{}\"\n",
            words.join(" "),
            rule.reply
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sarah() -> NpcState {
        NpcState::scripted(
            NpcProfile::new("Sarah Thomas", "Marketing Manager", "Marketing", "knowledgex.com"),
            vec![
                ReplyRule {
                    trigger: Trigger::all_of(["ads", "strategy"]),
                    reply: "Please refer to the Ads Strategy Handbook (CloudDisk:ads_strategy/ads_strategy_handbook.md).".into(),
                    releases: Some("ads".into()),
                },
                ReplyRule {
                    trigger: Trigger::all_of(["missing", "data"]),
                    reply: "Please refer to the Handbook at CloudDisk://data_completion/data_completion_manual.md".into(),
                    releases: Some("dc".into()),
                },
            ],
        )
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize("Ads  Strategy?"), vec!["ads", "strategy"]);
        assert!(normalize("").is_empty());
        assert_eq!(
            normalize("Hi, Sarah! How's it going?"),
            vec!["hi", "sarah", "how", "s", "it", "going"]
        );
    }

    #[test]
    fn unicode_whitespace_matches_plain_space() {
        let spaces = [
            '\u{0009}', '\u{000A}', '\u{000B}', '\u{000C}', '\u{000D}', '\u{0020}', '\u{0085}',
            '\u{00A0}', '\u{1680}', '\u{2000}', '\u{2001}', '\u{2002}', '\u{2003}', '\u{2004}',
            '\u{2005}', '\u{2006}', '\u{2007}', '\u{2008}', '\u{2009}', '\u{200A}', '\u{2028}',
            '\u{2029}', '\u{202F}', '\u{205F}', '\u{3000}',
        ];
        let plain = normalize("plan the ads strategy");
        for ws in spaces {
            assert!(ws.is_whitespace());
            let text = format!("plan{ws}the{ws}ads{ws}{ws}strategy");
            assert_eq!(normalize(&text), plain, "codepoint U+{:04X}", ws as u32);
        }
    }

    #[test]
    fn multi_clue_npc_disambiguates() {
        let npc = sarah();
        let r = respond(&npc, "how should I plan the ads strategy?");
        assert_eq!(
            r.reply,
            "Please refer to the Ads Strategy Handbook (CloudDisk:ads_strategy/ads_strategy_handbook.md)."
        );
        assert_eq!(r.released.as_deref(), Some("ads"));
        let r = respond(&npc, "how do I complete missing data?");
        assert!(r.reply.contains("data_completion_manual.md"));
        assert_eq!(r.released.as_deref(), Some("dc"));
    }

    #[test]
    fn empty_message_gets_default() {
        let r = respond(&sarah(), "");
        assert_eq!(r.reply, DEFAULT_REPLY);
        assert_eq!(r.released, None);
        assert_eq!(r.rule_index, None);
    }

    #[test]
    fn any_of_policy() {
        let t = Trigger {
            keywords: ["a".to_string(), "b".to_string()].into(),
            policy: MatchPolicy::AnyOf,
        };
        assert!(t.matches(&token_set("b only")));
        assert!(!t.matches(&token_set("neither")));
    }

    #[test]
    fn prompt_lists_every_rule() {
        let p = render_system_prompt(&sarah(), "Alice Smith");
        assert!(p.starts_with("You are Sarah Thomas, a Marketing Manager of department Marketing."));
        assert_eq!(p.matches("- If asked about").count(), 2);
    }

    #[test]
    fn slug_and_email() {
        let p = NpcProfile::new("Sarah Thomas", "r", "d", "knowledgex.com");
        assert_eq!(p.id, "sarah_thomas");
        assert_eq!(p.email, "sarah.thomas@knowledgex.com");
    }
}
